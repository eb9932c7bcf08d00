#include "manyiv/inference.hpp"

#include <cmath>

#include "manyiv/errors.hpp"
#include "manyiv/parallel.hpp"
#include "manyiv/rng.hpp"

namespace manyiv {

double TestResult::diag(const std::string& key) const {
  for (const auto& [k, v] : diagnostics)
    if (k == key) return v;
  throw DataError("missing diagnostic '" + key + "'");
}

TestResult simple_test(SimpleTestKind kind, const ProjectionContext& ctx,
                       const IVDataset& data, double beta0, double alpha,
                       VarianceKind variance, int threads) {
  const GammaHat gamma = estimate_gamma(variance, ctx, data, beta0, threads);
  const StatBundle b = stat_bundle(ctx, data, beta0, gamma);
  TestResult r;
  r.alpha = alpha;
  switch (kind) {
    case SimpleTestKind::ar:
      r.test_name = "ar";
      r.statistic = b.ar;
      r.critical_value = norm_ppf(1.0 - alpha);
      break;
    case SimpleTestKind::lm:
      r.test_name = "lm";
      r.statistic = b.lm * b.lm;
      r.critical_value = chisq1_quantile(1.0 - alpha);
      break;
    case SimpleTestKind::lm_star:
      r.test_name = "lm_star";
      r.statistic = b.lm_star * b.lm_star;
      r.critical_value = chisq1_quantile(1.0 - alpha);
      break;
  }
  r.reject = r.statistic >= r.critical_value;
  r.diagnostics = {{"d_hat", b.d_hat}, {"f_tilde", b.f_tilde}, {"rho", gamma.rho}};
  return r;
}

TestResult ar_two_sided_test(const ProjectionContext& ctx, const IVDataset& data,
                             double beta0, double alpha, VarianceKind variance,
                             int threads) {
  const GammaHat gamma = estimate_gamma(variance, ctx, data, beta0, threads);
  const StatBundle b = stat_bundle(ctx, data, beta0, gamma);
  TestResult r;
  r.test_name = "ar_two_sided";
  r.alpha = alpha;
  r.statistic = b.ar * b.ar;
  r.critical_value = chisq1_quantile(1.0 - alpha);
  r.reject = r.statistic >= r.critical_value;
  return r;
}

TestResult clc_test(const ProjectionContext& ctx, const IVDataset& data,
                    double beta0, double alpha, MuMethod method,
                    VarianceKind variance, const SelectionConfig& cfg,
                    int threads) {
  const GammaHat gamma = estimate_gamma(variance, ctx, data, beta0, threads);
  const StatBundle b = stat_bundle(ctx, data, beta0, gamma);
  SelectionConfig local = cfg;
  local.slack_n = static_cast<double>(data.n());
  const WeightSelection sel =
      minimax_weights(b, gamma, beta0, local.b_space, method, alpha, local);
  TestResult r;
  r.test_name = method == MuMethod::pp ? "clc_pp" : "clc_krs";
  r.alpha = alpha;
  r.weights = sel.w;
  r.statistic = sel.w.a1 * b.ar * b.ar + sel.w.a2 * b.lm * b.lm +
                (1.0 - sel.w.a1 - sel.w.a2) * b.lm_star * b.lm_star;
  r.critical_value = sel.diag.crit;
  r.reject = r.statistic >= r.critical_value;
  r.diagnostics = {{"d_hat", b.d_hat},
                   {"f_tilde", b.f_tilde},
                   {"f_s", sel.diag.f_s},
                   {"sigma_d", sel.diag.sigma_d},
                   {"r_hat", sel.diag.r_hat},
                   {"a_lower", sel.diag.a_lower},
                   {"xi_size", static_cast<double>(sel.diag.xi_size)},
                   {"cmax", sel.diag.cmax},
                   {"c_b", sel.diag.c_b},
                   {"rho", gamma.rho},
                   {"krs_fallback", sel.diag.krs_fallback ? 1.0 : 0.0},
                   {"rho_zero", sel.diag.rho_zero ? 1.0 : 0.0}};
  return r;
}

TestResult jive_wald(const ProjectionContext& ctx, const IVDataset& data,
                     double beta0, double alpha, VarianceKind variance,
                     int threads) {
  if (data.W) throw DataError("jive_wald expects partialled-out data");
  const double q_xx = ctx.quad_form(data.x, data.x);
  if (std::fabs(q_xx) < 1e-12) throw NumericalError("unidentified JIVE");
  const double q_xy = ctx.quad_form(data.x, data.y);
  const double bhat = q_xy / q_xx;
  // Variance plug-in: psi evaluated at the JIVE point estimate. The paper
  // defers the exact estimator; this choice is replaceable and recorded.
  const GammaHat gamma_at_bhat = estimate_gamma(variance, ctx, data, bhat, threads);
  TestResult r;
  r.test_name = "jive_wald";
  r.alpha = alpha;
  r.statistic = (bhat - beta0) * (bhat - beta0) * q_xx * q_xx / gamma_at_bhat.psi;
  r.critical_value = chisq1_quantile(1.0 - alpha);
  r.reject = r.statistic >= r.critical_value;
  r.diagnostics = {{"beta_jive", bhat},
                   {"q_xx", q_xx},
                   {"psi_at_bhat", gamma_at_bhat.psi},
                   {"variance_plugin", 1.0}};
  return r;
}

bool two_step_uses_wald(double f_tilde) { return f_tilde > 9.98; }

TestResult two_step_test(const ProjectionContext& ctx, const IVDataset& data,
                         double beta0, double alpha_total, VarianceKind variance,
                         int threads) {
  if (alpha_total != 0.05)
    throw DataError("two_step_test: the 9.98 / 2% rule is defined for a 5% level");
  const GammaHat gamma = estimate_gamma(variance, ctx, data, beta0, threads);
  const StatBundle b = stat_bundle(ctx, data, beta0, gamma);
  TestResult r;
  r.test_name = "two_step";
  r.alpha = alpha_total;
  if (two_step_uses_wald(b.f_tilde)) {
    TestResult wald = jive_wald(ctx, data, beta0, 0.02, variance, threads);
    r.branch = "wald";
    r.statistic = wald.statistic;
    r.critical_value = wald.critical_value;
    r.reject = wald.reject;
  } else {
    r.branch = "ar";
    r.statistic = b.ar;
    r.critical_value = norm_ppf(1.0 - 0.02);
    r.reject = r.statistic >= r.critical_value;
  }
  r.diagnostics = {{"f_tilde", b.f_tilde}};
  return r;
}

ConfidenceInterval confidence_interval(
    const std::function<TestResult(double, std::uint64_t)>& point_test,
    Interval b_space, int grid_n, std::uint64_t seed, int threads,
    std::vector<int>* decisions) {
  if (grid_n < 2) throw DataError("confidence_interval: need grid_n >= 2");
  if (!(b_space.lo < b_space.hi))
    throw DataError("confidence_interval: need B.lo < B.hi");

  // decision per grid point: 0 accept, 1 reject, 2 rejected with error
  std::vector<int> dec(static_cast<std::size_t>(grid_n), 1);
  std::vector<double> grid(static_cast<std::size_t>(grid_n));
  for (int j = 0; j < grid_n; ++j)
    grid[static_cast<std::size_t>(j)] =
        b_space.lo + (b_space.hi - b_space.lo) * j / (grid_n - 1);

  parallel_for(static_cast<std::size_t>(grid_n), threads, [&](std::size_t j) {
    const std::uint64_t point_seed = derive_seed(seed, j);
    try {
      const TestResult t = point_test(grid[j], point_seed);
      dec[j] = t.reject ? 1 : 0;
    } catch (const std::exception&) {
      dec[j] = 2;
    }
  });

  ConfidenceInterval ci;
  ci.grid_n = grid_n;
  int first = -1, last = -1;
  for (int j = 0; j < grid_n; ++j) {
    if (dec[static_cast<std::size_t>(j)] == 0) {
      if (first < 0) first = j;
      last = j;
      ++ci.accepted_count;
    } else if (dec[static_cast<std::size_t>(j)] == 2) {
      ++ci.error_count;
    }
  }
  if (first >= 0) {
    ci.empty = false;
    ci.lower = grid[static_cast<std::size_t>(first)];
    ci.upper = grid[static_cast<std::size_t>(last)];
    ci.disconnected = ci.accepted_count != (last - first + 1);
  }
  if (decisions) *decisions = dec;
  return ci;
}

}  // namespace manyiv
