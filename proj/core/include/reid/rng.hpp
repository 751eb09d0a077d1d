#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace reid {

// Deterministic RNG. std::mt19937_64 is bit-exact across platforms; the
// distributions below are hand-rolled because the std ones are
// implementation-defined, which would break seeded reproducibility.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Derives an independent stream, e.g. per (identity, image).
  Rng fork(uint64_t salt) {
    uint64_t s = engine_();
    return Rng(s ^ (salt * 0x9e3779b97f4a7c15ULL + 0x85ebca6bULL));
  }

  uint64_t bits() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return (engine_() >> 11) * (1.0 / 9007199254740992.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int64_t uniform_int(int64_t n) { return static_cast<int64_t>(uniform() * static_cast<double>(n)); }

  // Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace reid
