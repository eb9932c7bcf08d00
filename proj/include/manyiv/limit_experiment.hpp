#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "manyiv/variance.hpp"

namespace manyiv {

// Combination weights on (AR^2, LM^2); the LM*^2 weight is 1 - a1 - a2.
struct Weights {
  double a1 = 0;
  double a2 = 0;
};

struct Interval {
  double lo = 0;
  double hi = 0;
};

struct MCConfig {
  int draws = 2000;
  std::uint64_t seed = 1;
  bool antithetic = true;
};

// One R x 2 standard-normal matrix per seed. All critical values and power
// estimates taken from the same DrawMatrix share these draws (common random
// numbers), which the slackness rule of the weight search presumes.
struct DrawMatrix {
  std::vector<double> z1, z2;
  int R = 0;
  bool antithetic = false;
};

DrawMatrix make_draws(const MCConfig& mc);

// (1-alpha) empirical quantile of
//   a1 Z1^2 + a2 (rho Z1 + sqrt(1-rho^2) Z2)^2 + (1-a1-a2) Z2^2,
// order statistic at index ceil((1-alpha) R), 1-based.
double crit_value(const Weights& w, double rho, double alpha,
                  const DrawMatrix& draws);

double crit_value_max(double rho, double alpha, const DrawMatrix& draws,
                      const std::vector<Weights>& a_grid);

// Deviation coefficients (C1(delta), C2(delta)); errors when the bracket
// term 1 - (delta^2, delta) Sigma^{-1} (phi13, tau)^T is within 1e-10 of 0.
struct DeviationCoefs {
  double c1 = 0;
  double c2 = 0;
  double bracket = 0;
};
DeviationCoefs coeff_c(double delta, const GammaHat& gamma);

double bracket_term(double delta, const GammaHat& gamma);

// sup over the delta grid of bracket(delta)^2.
double c_b_sup(const GammaHat& gamma, const std::vector<double>& delta_grid);

// Monte Carlo rejection frequency of the combination statistic with
// noncentralities (C1(delta) mu, C2(delta) mu) against crit_value(w).
double power_estimate(const Weights& w, double delta, double mu_proxy,
                      const GammaHat& gamma, double alpha,
                      const DrawMatrix& draws);

// Eigendecomposition of [[a1+a2 rho^2, a2 rho q],[a2 rho q, 1-a1-a2 rho^2]]
// with q = sqrt(1-rho^2); nu1 >= nu2 >= 0 and nu1 + nu2 = 1.
struct Eig2 {
  double nu1 = 0;
  double nu2 = 0;
  Eigen::Matrix2d rotation;
};
Eig2 eig2(const Weights& w, double rho);

}  // namespace manyiv
