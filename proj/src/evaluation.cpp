#include "nearfield/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace nearfield {

Assignment hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  for (const auto& row : cost) {
    if (row.size() != n) throw std::invalid_argument("assignment cost matrix must be square");
  }
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials formulation, 1-based with a virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment a;
  a.perm.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) a.perm[p[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) a.cost += cost[i][a.perm[i]];
  return a;
}

Assignment match_sources(const std::vector<Vec3>& estimates, const std::vector<Vec3>& truths) {
  if (estimates.size() != truths.size()) throw std::invalid_argument("estimate and truth counts differ");
  const std::size_t k = truths.size();
  std::vector<std::vector<double>> cost(k, std::vector<double>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) cost[i][j] = (truths[i] - estimates[j]).squaredNorm();
  }
  if (k > 6) return hungarian(cost);

  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  Assignment best{perm, std::numeric_limits<double>::infinity()};
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < k; ++i) c += cost[i][perm[i]];
    if (c < best.cost) best = {perm, c};
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (k == 0) best.cost = 0.0;
  return best;
}

std::vector<Vec3> cartesian_of(const std::vector<SourcePosition>& sources) {
  std::vector<Vec3> out;
  out.reserve(sources.size());
  for (const SourcePosition& s : sources) out.push_back(s.cartesian);
  return out;
}

Assignment match_sources(const std::vector<SourcePosition>& estimates, const std::vector<SourcePosition>& truths) {
  return match_sources(cartesian_of(estimates), cartesian_of(truths));
}

double rmse(const std::vector<Trial>& trials) {
  if (trials.empty()) throw std::invalid_argument("rmse needs at least one trial");
  double total = 0.0;
  std::size_t terms = 0;
  for (const Trial& t : trials) {
    if (t.truths.empty()) throw std::invalid_argument("trial without sources");
    total += match_sources(t.estimates, t.truths).cost;
    terms += 3 * t.truths.size();
  }
  return std::sqrt(total / static_cast<double>(terms));
}

}  // namespace nearfield
