#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace nearfield {

/// Seedable generator used by every stochastic operation in the library.
///
/// Child streams are derived with split(), which hashes (seed, index) through
/// SplitMix64 so that per-sample streams do not depend on how many draws the
/// parent has already made.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  Rng split(std::uint64_t index) const { return Rng(derive_seed(seed_, index)); }

  double uniform(double lo, double hi);
  double normal();
  /// Circularly-symmetric complex Gaussian with E|z|^2 = 1.
  std::complex<double> complex_normal();
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace nearfield
