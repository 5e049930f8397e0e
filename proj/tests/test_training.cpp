#include <cmath>
#include <limits>

#include "doctest.h"
#include "nearfield/errors.hpp"
#include "nearfield/training.hpp"

using namespace nearfield;

namespace {

ScenarioPrior tiny_prior(int k = 1) {
  ScenarioPrior p;
  p.geom = {4, 2, 0.05, 0.05, 0.1};
  p.kappa = 4;
  p.snr_db = 0;
  p.num_sources = k;
  p.num_snapshots = 20;
  p.range_min = 2 * p.geom.aperture();
  p.range_max = 0.9;
  return p;
}

struct ScalarParam {
  std::vector<double> value{0.5};
  std::vector<double> grad{0.0};
  std::vector<ParamRef> refs() { return {{"theta", value, grad}}; }
};

}  // namespace

TEST_CASE("AdamW with zero gradient") {
  TrainingConfig c;
  c.weight_decay = 0.0;
  ScalarParam p;
  AdamWState s;
  auto refs = p.refs();
  for (int i = 0; i < 5; ++i) adamw_step(refs, s, c);
  CHECK(p.value[0] == 0.5);

  c.weight_decay = 0.01;
  c.learning_rate = 1e-4;
  ScalarParam q;
  AdamWState t;
  auto qrefs = q.refs();
  double expected = 0.5;
  for (int i = 0; i < 10; ++i) {
    adamw_step(qrefs, t, c);
    expected *= 1 - 1e-6;
    CHECK(q.value[0] == doctest::Approx(expected).epsilon(1e-15));
  }
}

TEST_CASE("AdamW scalar oracle") {
  TrainingConfig c;
  c.learning_rate = 0.01;
  c.weight_decay = 0.1;
  ScalarParam p;
  AdamWState s;
  auto refs = p.refs();
  double theta = 0.5, m = 0, v = 0;
  const double grads[] = {0.3, -1.2, 0.05};
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    p.grad[0] = g;
    adamw_step(refs, s, c);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    theta = theta - 0.01 * (mh / (std::sqrt(vh) + 1e-8) + 0.1 * theta);
    CHECK(std::abs(p.value[0] - theta) <= 1e-12);
  }
  // First step: m_hat = g, v_hat = g^2, so the move is lr * (sign(g) + wd * theta).
  ScalarParam one;
  one.grad[0] = 2.0;
  AdamWState s1;
  auto r1 = one.refs();
  adamw_step(r1, s1, c);
  CHECK(one.value[0] == doctest::Approx(0.5 - 0.01 * (2.0 / (2.0 + 1e-8) + 0.05)).epsilon(1e-14));
}

TEST_CASE("epoch batching never forms a single-sample batch") {
  Rng rng(1);
  for (std::size_t count : {1, 2, 31, 32, 33, 65, 100}) {
    const auto batches = epoch_batches(count, 32, rng);
    std::vector<int> seen(count, 0);
    for (const auto& b : batches) {
      CHECK(b.size() >= 2);
      for (std::size_t i : b) ++seen[i];
    }
    if (count > 1) {
      for (int s : seen) CHECK(s == 1);
    } else {
      CHECK(batches == std::vector<std::vector<std::size_t>>{{0, 0}});
    }
  }
  CHECK_THROWS_AS(epoch_batches(0, 32, rng), std::invalid_argument);
}

TEST_CASE("training is reproducible and the loss falls") {
  const Dataset d = generate_dataset(tiny_prior(), 256, 3);
  TrainingConfig c;
  c.epochs = 20;
  c.learning_rate = 1e-3;
  c.batch_size = 32;
  Rng r1(5), r2(5);
  const TrainResult a = train(d, desk_architecture(8, 1), c, r1);
  const TrainResult b = train(d, desk_architecture(8, 1), c, r2);
  REQUIRE(a.history.size() == 20);
  for (std::size_t e = 0; e < 20; ++e) {
    CHECK(a.history[e].loss == b.history[e].loss);
    CHECK(a.history[e].epoch == e + 1);
  }
  // Moving average over 5 epochs is non-increasing.
  std::vector<double> smooth;
  for (std::size_t e = 4; e < 20; ++e) {
    double s = 0;
    for (std::size_t j = e - 4; j <= e; ++j) s += a.history[j].loss;
    smooth.push_back(s / 5);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) CHECK(smooth[i] <= smooth[i - 1]);
}

TEST_CASE("single-sample memorization") {
  const Dataset d = generate_dataset(tiny_prior(), 1, 8);
  TrainingConfig c;
  c.epochs = 200;
  c.learning_rate = 1e-2;
  Rng rng(2);
  TrainResult r = train(d, desk_architecture(8, 1), c, rng);
  CHECK(r.history.back().loss < 1e-3);
}

TEST_CASE("non-finite loss aborts training") {
  Dataset d = generate_dataset(tiny_prior(), 4, 1);
  d.records[2].labels[0] = std::numeric_limits<double>::quiet_NaN();
  TrainingConfig c;
  c.epochs = 3;
  c.batch_size = 4;
  Rng rng(1);
  CHECK_THROWS_AS(train(d, desk_architecture(8, 1), c, rng), TrainingDiverged);
}

TEST_CASE("shape and config errors") {
  const Dataset d = generate_dataset(tiny_prior(), 4, 1);
  TrainingConfig c;
  c.epochs = 1;
  Rng rng(1);
  CHECK_THROWS_AS(train(d, desk_architecture(16, 1), c, rng), std::invalid_argument);
  c.learning_rate = 0;
  CHECK_THROWS_AS(train(d, desk_architecture(8, 1), c, rng), ConfigError);
}

TEST_CASE("run log lines") {
  CHECK(format_epoch_log({3, 0.25, 1.5}) == "epoch=3 loss=0.25 seconds=1.5");
  const std::string line = format_config_log(paper_architecture(128, 3), TrainingConfig{});
  for (const char* part : {"optimizer=adamw", "lr=0.0001", "weight_decay=0.01", "batch=32", "epochs=1200",
                           "dropout=0.3", "loss=mse", "filters=32,64,128,256", "fc=1024,512,256"}) {
    CHECK(line.find(part) != std::string::npos);
  }
}
