#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nearfield/layers.hpp"

namespace nearfield::testing {

struct GradCheckResult {
  std::size_t probes = 0;
  std::size_t failures = 0;
  std::size_t skipped = 0;
  double worst = 0.0;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-5});
}

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

/// Central differences of L = sum(w * layer(x)) against backward(w), probing
/// input elements and parameters at random. Dropout masks are replayed by
/// reseeding the context generator before every forward pass. Probes whose
/// perturbation flips a ReLU sign or a max-pool winner straddle a kink, where
/// central differences are meaningless; those are redrawn and counted as skipped.
inline GradCheckResult check_gradients(Layer& layer, Tensor input, Mode mode, std::uint64_t seed,
                                       std::size_t probes, double step = 1e-4, double tolerance = 1e-4) {
  Rng rng(seed);
  auto loss_of = [&](const Tensor& x, const Tensor& w, std::vector<std::size_t>& pattern) {
    Rng drop(seed ^ 0x5eedULL);
    ForwardContext ctx{mode, &drop};
    const Tensor y = layer.forward(x, ctx);
    pattern.clear();
    layer.collect_pattern(pattern);
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) l += w[i] * y[i];
    return l;
  };

  std::vector<ParamRef> params;
  layer.collect_parameters("", params);
  for (auto& p : params) std::fill(p.grad.begin(), p.grad.end(), 0.0);

  Rng drop(seed ^ 0x5eedULL);
  ForwardContext ctx{mode, &drop};
  const Tensor y = layer.forward(input, ctx);
  std::vector<std::size_t> base_pattern, plus_pattern, minus_pattern;
  layer.collect_pattern(base_pattern);
  const Tensor w = random_tensor(y.shape(), rng);
  const Tensor grad_input = layer.backward(w);
  std::vector<std::vector<double>> grads;
  for (auto& p : params) grads.emplace_back(p.grad.begin(), p.grad.end());

  std::size_t param_total = 0;
  for (auto& p : params) param_total += p.value.size();

  GradCheckResult result;
  const std::size_t max_draws = 50 * probes;
  for (std::size_t probe = 0, draws = 0; probe < probes && draws < max_draws; ++draws) {
    const bool use_param = param_total > 0 && (probe % 2 == 1 || input.size() == 0);
    double* slot = nullptr;
    double analytic = 0.0;
    if (use_param) {
      std::size_t flat = rng.next_u64() % param_total;
      std::size_t which = 0;
      while (flat >= params[which].value.size()) flat -= params[which++].value.size();
      slot = &params[which].value[flat];
      analytic = grads[which][flat];
    } else {
      const std::size_t i = rng.next_u64() % input.size();
      slot = &input[i];
      analytic = grad_input[i];
    }
    const double saved = *slot;
    *slot = saved + step;
    const double plus = loss_of(input, w, plus_pattern);
    *slot = saved - step;
    const double minus = loss_of(input, w, minus_pattern);
    *slot = saved;
    if (plus_pattern != base_pattern || minus_pattern != base_pattern) {
      ++result.skipped;
      continue;
    }
    const double numeric = (plus - minus) / (2 * step);
    const double err = relative_error(analytic, numeric);
    result.worst = std::max(result.worst, err);
    result.failures += err > tolerance;
    ++result.probes;
    ++probe;
  }
  return result;
}

}  // namespace nearfield::testing
