#include "manyiv/weight_selection.hpp"

#include <algorithm>
#include <cmath>

#include "limit_detail.hpp"
#include "manyiv/errors.hpp"

namespace manyiv {

void SelectionConfig::validate() const {
  if (!(p1 > 0.0 && p1 < 1.0)) throw DataError("SelectionConfig: need 0 < p1 < 1");
  if (!(p2 > 1.0)) throw DataError("SelectionConfig: need p2 > 1");
  if (t_grid < 2) throw DataError("SelectionConfig: need t_grid >= 2");
  if (delta_grid_size < 1) throw DataError("SelectionConfig: need delta grid >= 1");
  if (!(a_bar > 0.0 && a_bar < 1.0)) throw DataError("SelectionConfig: need 0 < a_bar < 1");
  if (!(slack_n > 0.0)) throw DataError("SelectionConfig: need slack_n > 0");
}

double mu_proxy_pp(double d_hat, double sigma_d_hat) {
  if (!(sigma_d_hat > 0.0)) throw NumericalError("mu_proxy_pp: sigma_D <= 0");
  const double r = (d_hat * d_hat) / (sigma_d_hat * sigma_d_hat);
  return sigma_d_hat * std::sqrt(std::max(r - 1.0, 0.0));
}

double krs_shrinkage(double r_hat, bool* fallback) {
  if (fallback) *fallback = false;
  if (!(r_hat >= 0.0)) throw NumericalError("krs_shrinkage: negative r");
  // sum_{j>=0} (-r/2)^j / (j! (1+2j)), term ratio (-r/2) (1+2j) / ((j+1)(3+2j)).
  const double x = -0.5 * r_hat;
  double term = 1.0, sum = 1.0, max_term = 1.0;
  for (int j = 0; j < 500; ++j) {
    term *= x * (1.0 + 2.0 * j) / ((j + 1.0) * (3.0 + 2.0 * j));
    sum += term;
    max_term = std::max(max_term, std::fabs(term));
    if (std::fabs(term) < 1e-14 * std::fabs(sum)) break;
  }
  // The alternating terms peak near e^{r/2}; once accumulated rounding of
  // that magnitude can swamp the sum, the series value is meaningless.
  if (!(sum > 0.0) || !std::isfinite(sum) || sum < max_term * 1e-13) {
    // Catastrophic cancellation at large r; the correction term is
    // e^{-r/2}/sum <= 1 and numerically zero there.
    if (fallback) *fallback = true;
    return std::max(r_hat - 1.0, 0.0);
  }
  // The correction lies in [0,1] exactly; clamp off fp dust so the
  // sandwich max(r-1,0) <= r_krs <= r stays an identity.
  const double corr = std::min(std::exp(-0.5 * r_hat) / sum, 1.0);
  return std::min(std::max(r_hat - 1.0 + corr, 0.0), r_hat);
}

double mu_proxy_krs(double d_hat, double sigma_d_hat, bool* fallback) {
  if (!(sigma_d_hat > 0.0)) throw NumericalError("mu_proxy_krs: sigma_D <= 0");
  const double r = (d_hat * d_hat) / (sigma_d_hat * sigma_d_hat);
  return sigma_d_hat * std::sqrt(krs_shrinkage(r, fallback));
}

LowerBoundA lower_bound_a(double mu_proxy, const GammaHat& gamma, double c_b,
                          double cmax, const SelectionConfig& cfg) {
  cfg.validate();
  gamma.validate();
  if (!(cmax > 0.0)) throw NumericalError("lower_bound_a: cmax <= 0");
  LowerBoundA out;
  if (gamma.rho == 0.0) {
    // Delta_* is infinite; the second argument of the min degenerates to 0.
    out.value = 0.0;
    out.rho_zero = true;
    return out;
  }
  const double mu2 = mu_proxy * mu_proxy;
  if (mu2 == 0.0) {
    out.value = cfg.p1;  // C/0 = +infinity convention
    return out;
  }
  const double dstar2 = gamma.phi1 / (gamma.psi * gamma.rho * gamma.rho);
  const double second = cfg.p2 * cmax * gamma.phi1 * c_b / (dstar2 * dstar2 * mu2);
  out.value = std::min(cfg.p1, second);
  return out;
}

std::vector<GridPoint> weight_grid(double lower, const SelectionConfig& cfg) {
  cfg.validate();
  if (!(lower >= 0.0 && lower < 1.0))
    throw DataError("weight_grid: lower bound outside [0,1)");
  const double pi_half = std::asin(1.0);
  const double t1_lo = std::asin(std::sqrt(lower));
  const int m = cfg.t_grid;
  std::vector<GridPoint> grid;
  grid.reserve(static_cast<std::size_t>(m) * static_cast<std::size_t>(m));
  for (int i1 = 0; i1 < m; ++i1) {
    const double t1 = t1_lo + (pi_half - t1_lo) * i1 / (m - 1);
    const double s1 = std::sin(t1);
    const double c1 = std::cos(t1);
    for (int i2 = 0; i2 < m; ++i2) {
      const double t2 = pi_half * i2 / (m - 1);
      const double s2 = std::sin(t2);
      GridPoint p;
      p.i1 = i1;
      p.i2 = i2;
      p.t1 = t1;
      p.t2 = t2;
      p.w.a1 = s1 * s1;
      p.w.a2 = c1 * c1 * s2 * s2;
      // Clip onto the a_bar simplex, a2 first.
      if (p.w.a1 > cfg.a_bar) {
        p.w.a1 = cfg.a_bar;
        p.w.a2 = 0.0;
      } else if (p.w.a1 + p.w.a2 > cfg.a_bar) {
        p.w.a2 = cfg.a_bar - p.w.a1;
      }
      grid.push_back(p);
    }
  }
  return grid;
}

namespace {

std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> v(static_cast<std::size_t>(count));
  if (count == 1) {
    v[0] = 0.5 * (lo + hi);
    return v;
  }
  for (int i = 0; i < count; ++i)
    v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
  return v;
}

}  // namespace

WeightSelection minimax_weights_for_proxy(double f, const GammaHat& gamma,
                                          double beta0, Interval b_space,
                                          double alpha,
                                          const SelectionConfig& cfg,
                                          const DrawMatrix& draws) {
  cfg.validate();
  gamma.validate();
  if (!(b_space.lo <= beta0 && beta0 <= b_space.hi))
    throw DataError("minimax_weights: beta0 outside B");

  WeightSelection out;
  SelectionDiagnostics& dg = out.diag;
  dg.f_s = f;

  const std::vector<double> dgrid =
      linspace(b_space.lo - beta0, b_space.hi - beta0, cfg.delta_grid_size);

  // c_B scans the same grid, augmented with 0 when 0 lies in D(beta0).
  {
    std::vector<double> cb_grid = dgrid;
    if (dgrid.front() <= 0.0 && dgrid.back() >= 0.0 &&
        std::find(cb_grid.begin(), cb_grid.end(), 0.0) == cb_grid.end())
      cb_grid.push_back(0.0);
    dg.c_b = c_b_sup(gamma, cb_grid);
  }

  // C_{alpha,max} over the full trigonometric grid covering A0.
  std::vector<double> A0v, B0v, C0v, scratch;
  detail::fill_components(draws, gamma.rho, 0.0, 0.0, A0v, B0v, C0v);
  {
    double cmax = 0.0;
    for (const GridPoint& p : weight_grid(0.0, cfg))
      cmax = std::max(cmax,
                      detail::quantile_of_combo(A0v, B0v, C0v, p.w, alpha, scratch));
    dg.cmax = cmax;
  }

  const LowerBoundA lb = lower_bound_a(f, gamma, dg.c_b, dg.cmax, cfg);
  dg.a_lower = lb.value;
  dg.rho_zero = lb.rho_zero;

  dg.grid = weight_grid(lb.value, cfg);
  const std::size_t W = dg.grid.size();
  const std::size_t D = dgrid.size();

  std::vector<double> crit(W);
  for (std::size_t w = 0; w < W; ++w)
    crit[w] = detail::quantile_of_combo(A0v, B0v, C0v, dg.grid[w].w, alpha, scratch);

  // Power table, shared draws across every (w, delta) cell.
  std::vector<double> power(W * D);
  std::vector<double> A, B, C;
  const double invR = 1.0 / static_cast<double>(draws.R);
  for (std::size_t j = 0; j < D; ++j) {
    const double delta = dgrid[j];
    const double bracket = bracket_term(delta, gamma);
    if (f > 0.0 && std::fabs(bracket) < 1e-10) {
      // Noncentralities diverge here; every combination rejects in the
      // limit, so the cell contributes no regret.
      ++dg.saturated_deltas;
      for (std::size_t w = 0; w < W; ++w) power[w * D + j] = 1.0;
      continue;
    }
    double m1 = 0.0, m2 = 0.0;
    if (f > 0.0) {
      const DeviationCoefs dc = coeff_c(delta, gamma);
      m1 = dc.c1 * f;
      m2 = dc.c2 * f;
    }
    detail::fill_components(draws, gamma.rho, m1, m2, A, B, C);
    for (std::size_t w = 0; w < W; ++w) {
      const Weights& wt = dg.grid[w].w;
      const int cnt =
          detail::count_ge(A.data(), B.data(), C.data(), draws.R, wt.a1, wt.a2,
                           1.0 - wt.a1 - wt.a2, crit[w]);
      power[w * D + j] = cnt * invR;
    }
  }

  dg.envelope.assign(D, 0.0);
  for (std::size_t j = 0; j < D; ++j) {
    double best = 0.0;
    for (std::size_t w = 0; w < W; ++w) best = std::max(best, power[w * D + j]);
    dg.envelope[j] = best;
  }

  dg.q_surface.assign(W, 0.0);
  for (std::size_t w = 0; w < W; ++w) {
    double worst = 0.0;
    for (std::size_t j = 0; j < D; ++j)
      worst = std::max(worst, dg.envelope[j] - power[w * D + j]);
    dg.q_surface[w] = worst;
  }

  // Slackness set: Q(w) <= Qmin + sqrt(Qmin(1-Qmin)) sqrt(2 log log R) / sqrt(R),
  // Qmin = min Q + 1/n.
  const double qmin =
      *std::min_element(dg.q_surface.begin(), dg.q_surface.end()) + 1.0 / cfg.slack_n;
  dg.q_min = qmin;
  const double R = static_cast<double>(draws.R);
  const double slack = std::sqrt(std::max(qmin * (1.0 - qmin), 0.0)) *
                       std::sqrt(2.0 * std::log(std::log(R))) / std::sqrt(R);
  dg.xi_bound = qmin + slack;
  std::vector<std::size_t> xi;
  for (std::size_t w = 0; w < W; ++w)
    if (dg.q_surface[w] <= dg.xi_bound) xi.push_back(w);
  dg.xi_size = static_cast<int>(xi.size());

  // Grid points are already ascending in (t1, t2); median element, 1-based
  // floor(L/2) clamped to the first element when L = 1.
  const std::size_t pick =
      std::max<std::size_t>(xi.size() / 2, 1) - 1;
  const std::size_t sel = xi[pick];
  dg.selected_index = static_cast<int>(pick) + 1;
  dg.crit = crit[sel];
  out.w = dg.grid[sel].w;
  return out;
}

WeightSelection minimax_weights(const StatBundle& bundle, const GammaHat& gamma,
                                double beta0, Interval b_space, MuMethod method,
                                double alpha, const SelectionConfig& cfg) {
  const double sd = sigma_d(gamma);
  if (!(sd > 0.0)) throw NumericalError("minimax_weights: sigma_D = 0");
  bool fallback = false;
  const double f = method == MuMethod::pp
                       ? mu_proxy_pp(bundle.d_hat, sd)
                       : mu_proxy_krs(bundle.d_hat, sd, &fallback);
  const DrawMatrix draws = make_draws(cfg.mc);
  WeightSelection sel =
      minimax_weights_for_proxy(f, gamma, beta0, b_space, alpha, cfg, draws);
  sel.diag.sigma_d = sd;
  sel.diag.d_hat = bundle.d_hat;
  sel.diag.r_hat = (bundle.d_hat * bundle.d_hat) / (sd * sd);
  sel.diag.krs_fallback = fallback;
  return sel;
}

}  // namespace manyiv
