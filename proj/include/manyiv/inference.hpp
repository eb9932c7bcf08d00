#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "manyiv/weight_selection.hpp"

namespace manyiv {

enum class SimpleTestKind { ar, lm, lm_star };

struct TestResult {
  std::string test_name;
  double statistic = 0;
  double critical_value = 0;
  bool reject = false;
  double alpha = 0;
  std::optional<Weights> weights;
  std::string branch;  // two-step only: "wald" or "ar"
  std::vector<std::pair<std::string, double>> diagnostics;

  double diag(const std::string& key) const;
};

// One-sided AR (raw statistic vs z_alpha) or chi-squared(1) tests on the
// squared LM / LM* statistics.
TestResult simple_test(SimpleTestKind kind, const ProjectionContext& ctx,
                       const IVDataset& data, double beta0, double alpha,
                       VarianceKind variance, int threads = 1);

// The two-sided AR variant (AR^2 vs chi-squared(1)), exposed behind its own
// entry point since the CLC construction squares AR.
TestResult ar_two_sided_test(const ProjectionContext& ctx, const IVDataset& data,
                             double beta0, double alpha, VarianceKind variance,
                             int threads = 1);

// Conditional linear combination test: minimax weights on
// (AR^2, LM^2, LM*^2) against the simulated quantile at the same seed.
TestResult clc_test(const ProjectionContext& ctx, const IVDataset& data,
                    double beta0, double alpha, MuMethod method,
                    VarianceKind variance, const SelectionConfig& cfg,
                    int threads = 1);

// JIVE estimate Q_{X,Y}/Q_{X,X} with Wald statistic
// (bhat - beta0)^2 Q_{X,X}^2 / psi(bhat).
TestResult jive_wald(const ProjectionContext& ctx, const IVDataset& data,
                     double beta0, double alpha, VarianceKind variance,
                     int threads = 1);

// Branch rule of the two-step procedure: Wald iff F~ > 9.98 (strict).
bool two_step_uses_wald(double f_tilde);

// Pre-test on F~ = Q_{X,X} / upsilon at 9.98: Wald branch at the 2% level
// when F~ > 9.98, one-sided AR at 2% otherwise. Defined only for a total
// level of 5%.
TestResult two_step_test(const ProjectionContext& ctx, const IVDataset& data,
                         double beta0, double alpha_total = 0.05,
                         VarianceKind variance = VarianceKind::crossfit,
                         int threads = 1);

struct ConfidenceInterval {
  bool empty = true;
  double lower = 0;
  double upper = 0;
  int grid_n = 0;
  int accepted_count = 0;
  bool disconnected = false;
  int error_count = 0;  // grid points recorded as "rejected with error"
};

// Inverts `point_test` over grid_n equispaced points of B. Each point gets
// its own RNG stream derived from (seed, grid index) so results do not
// depend on scheduling.
ConfidenceInterval confidence_interval(
    const std::function<TestResult(double beta0, std::uint64_t point_seed)>& point_test,
    Interval b_space, int grid_n, std::uint64_t seed, int threads = 1,
    std::vector<int>* decisions = nullptr);

}  // namespace manyiv
