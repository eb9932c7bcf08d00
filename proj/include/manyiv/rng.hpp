#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace manyiv {

// Mixes a master seed with a stream index so that parallel tasks get
// decorrelated, scheduling-independent substreams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// (1-p)-quantile helpers built on the standard normal.
double norm_ppf(double p);            // inverse standard normal CDF (AS241)
double norm_cdf(double x);
double chisq1_quantile(double p);     // p-quantile of chi-squared(1)

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform on (0,1), open on both ends.
  double uniform() {
    const std::uint64_t r = eng_();
    return (static_cast<double>(r >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via inverse CDF; keeps draws reproducible across
  // platforms since no libm transcendental enters the mapping.
  double normal() { return norm_ppf(uniform()); }

  // Poisson: CDF inversion below mu = 30, transformed rejection with a
  // normal-shaped hat (Hormann's PTRS) above.
  long poisson(double mu);

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace manyiv
