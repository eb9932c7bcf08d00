#include "manyiv/limit_experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "limit_detail.hpp"
#include "manyiv/errors.hpp"
#include "manyiv/rng.hpp"

namespace manyiv {

namespace {

void check_rho_alpha(double rho, double alpha) {
  if (!(std::fabs(rho) < 1.0)) throw NumericalError("crit_value: need |rho| < 1");
  if (!(alpha > 0.0 && alpha < 0.5))
    throw DataError("crit_value: need 0 < alpha < 0.5");
}

void check_weights(const Weights& w) {
  if (!(w.a1 >= 0.0) || !(w.a2 >= 0.0) || !(w.a1 + w.a2 < 1.0))
    throw DataError("weights outside the simplex A0");
}

}  // namespace

DrawMatrix make_draws(const MCConfig& mc) {
  if (mc.draws < 1000) throw DataError("MCConfig: need R >= 1000");
  if (mc.antithetic && mc.draws % 2 != 0)
    throw DataError("MCConfig: antithetic pairing needs even R");
  DrawMatrix d;
  d.R = mc.draws;
  d.antithetic = mc.antithetic;
  d.z1.resize(static_cast<std::size_t>(mc.draws));
  d.z2.resize(static_cast<std::size_t>(mc.draws));
  Rng rng(mc.seed);
  if (mc.antithetic) {
    for (int r = 0; r < mc.draws; r += 2) {
      const double a = rng.normal();
      const double b = rng.normal();
      d.z1[static_cast<std::size_t>(r)] = a;
      d.z2[static_cast<std::size_t>(r)] = b;
      d.z1[static_cast<std::size_t>(r) + 1] = a;
      d.z2[static_cast<std::size_t>(r) + 1] = -b;
    }
  } else {
    for (int r = 0; r < mc.draws; ++r) {
      d.z1[static_cast<std::size_t>(r)] = rng.normal();
      d.z2[static_cast<std::size_t>(r)] = rng.normal();
    }
  }
  return d;
}

namespace detail {

// Shared arithmetic for critical values and powers; one entry per draw.
void fill_components(const DrawMatrix& d, double rho, double m1, double m2,
                     std::vector<double>& A, std::vector<double>& B,
                     std::vector<double>& C) {
  const std::size_t R = static_cast<std::size_t>(d.R);
  A.resize(R);
  B.resize(R);
  C.resize(R);
  const double q = std::sqrt(1.0 - rho * rho);
  const double* z1 = d.z1.data();
  const double* z2 = d.z2.data();
  for (std::size_t r = 0; r < R; ++r) {
    const double u = z1[r] + m1;
    const double v = z2[r] + m2;
    A[r] = u * u;
    const double mix = rho * u + q * v;
    B[r] = mix * mix;
    C[r] = v * v;
  }
}

int count_ge(const double* __restrict A, const double* __restrict B,
             const double* __restrict C, int R, double a1, double a2,
             double a3, double c) {
  int cnt = 0;
  for (int r = 0; r < R; ++r) {
    const double s = a1 * A[r] + a2 * B[r] + a3 * C[r];
    cnt += (s >= c) ? 1 : 0;
  }
  return cnt;
}

double quantile_of_combo(const std::vector<double>& A, const std::vector<double>& B,
                         const std::vector<double>& C, const Weights& w,
                         double alpha, std::vector<double>& scratch) {
  const std::size_t R = A.size();
  scratch.resize(R);
  const double a3 = 1.0 - w.a1 - w.a2;
  for (std::size_t r = 0; r < R; ++r)
    scratch[r] = w.a1 * A[r] + w.a2 * B[r] + a3 * C[r];
  // Order statistic at ceil((1-alpha) R), 1-based.
  const auto idx = static_cast<std::size_t>(
      std::ceil((1.0 - alpha) * static_cast<double>(R)));
  auto nth = scratch.begin() + static_cast<std::ptrdiff_t>(idx - 1);
  std::nth_element(scratch.begin(), nth, scratch.end());
  return *nth;
}

}  // namespace detail

double crit_value(const Weights& w, double rho, double alpha,
                  const DrawMatrix& draws) {
  check_rho_alpha(rho, alpha);
  check_weights(w);
  std::vector<double> A, B, C, scratch;
  detail::fill_components(draws, rho, 0.0, 0.0, A, B, C);
  return detail::quantile_of_combo(A, B, C, w, alpha, scratch);
}

double crit_value_max(double rho, double alpha, const DrawMatrix& draws,
                      const std::vector<Weights>& a_grid) {
  check_rho_alpha(rho, alpha);
  if (a_grid.empty()) throw DataError("crit_value_max: empty weight grid");
  std::vector<double> A, B, C, scratch;
  detail::fill_components(draws, rho, 0.0, 0.0, A, B, C);
  double cmax = -std::numeric_limits<double>::infinity();
  for (const Weights& w : a_grid)
    cmax = std::max(cmax, detail::quantile_of_combo(A, B, C, w, alpha, scratch));
  return cmax;
}

double bracket_term(double delta, const GammaHat& gamma) {
  const Eigen::Vector2d c = gamma_projection_coefs(gamma);
  return 1.0 - (delta * delta * c[0] + delta * c[1]);
}

DeviationCoefs coeff_c(double delta, const GammaHat& gamma) {
  gamma.validate();
  DeviationCoefs out;
  out.bracket = bracket_term(delta, gamma);
  if (std::fabs(out.bracket) < 1e-10)
    throw NumericalError("deviation coefficient singular at delta=" +
                         std::to_string(delta));
  const double inv_sp1 = 1.0 / std::sqrt(gamma.phi1);
  const double inv_sps = 1.0 / std::sqrt(gamma.psi);
  const double q = std::sqrt(1.0 - gamma.rho * gamma.rho);
  out.c1 = inv_sp1 * delta * delta / out.bracket;
  out.c2 = (inv_sps * delta - gamma.rho * inv_sp1 * delta * delta) / (q * out.bracket);
  return out;
}

double c_b_sup(const GammaHat& gamma, const std::vector<double>& delta_grid) {
  if (delta_grid.empty()) throw DataError("c_b_sup: empty delta grid");
  double best = 0.0;
  for (double d : delta_grid) {
    const double b = bracket_term(d, gamma);
    best = std::max(best, b * b);
  }
  return best;
}

double power_estimate(const Weights& w, double delta, double mu_proxy,
                      const GammaHat& gamma, double alpha,
                      const DrawMatrix& draws) {
  check_weights(w);
  const double c = crit_value(w, gamma.rho, alpha, draws);
  const DeviationCoefs dc = coeff_c(delta, gamma);
  std::vector<double> A, B, C;
  detail::fill_components(draws, gamma.rho, dc.c1 * mu_proxy, dc.c2 * mu_proxy,
                          A, B, C);
  const int cnt = detail::count_ge(A.data(), B.data(), C.data(), draws.R, w.a1,
                                   w.a2, 1.0 - w.a1 - w.a2, c);
  return static_cast<double>(cnt) / static_cast<double>(draws.R);
}

Eig2 eig2(const Weights& w, double rho) {
  if (!(std::fabs(rho) < 1.0)) throw NumericalError("eig2: need |rho| < 1");
  const double q = std::sqrt(1.0 - rho * rho);
  const double a = w.a1 + w.a2 * rho * rho;
  const double b = w.a2 * rho * q;
  const double d = 1.0 - a;
  Eig2 out;
  if (b == 0.0) {
    // Already diagonal; identity on ties, else order the eigenvalues.
    if (a >= d) {
      out.nu1 = a;
      out.nu2 = d;
      out.rotation = Eigen::Matrix2d::Identity();
    } else {
      out.nu1 = d;
      out.nu2 = a;
      out.rotation << 0, 1, 1, 0;
    }
    return out;
  }
  const double det = a * d - b * b;
  const double disc = std::sqrt(std::max(1.0 - 4.0 * det, 0.0));
  out.nu1 = 0.5 * (1.0 + disc);
  out.nu2 = 0.5 * (1.0 - disc);
  if (out.nu2 < 0.0) {
    if (out.nu2 < -1e-12) throw NumericalError("eig2: combination matrix not PSD");
    out.nu2 = 0.0;
  }
  // Pick the better-conditioned eigenvector formula for nu1.
  Eigen::Vector2d v1;
  if (std::fabs(out.nu1 - a) >= std::fabs(out.nu1 - d))
    v1 << b, out.nu1 - a;
  else
    v1 << out.nu1 - d, b;
  v1.normalize();
  out.rotation.col(0) = v1;
  out.rotation.col(1) = Eigen::Vector2d(-v1[1], v1[0]);
  return out;
}

}  // namespace manyiv
