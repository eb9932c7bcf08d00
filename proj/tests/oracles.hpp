#pragma once

// Test-side oracles: literal double sums and dense-matrix references kept
// deliberately independent of the library's blockwise implementations.

#include <Eigen/Dense>
#include <cmath>

#include "manyiv/rng.hpp"

namespace oracle {

inline Eigen::MatrixXd dense_hat(const Eigen::MatrixXd& Z) {
  return Z * (Z.transpose() * Z).ldlt().solve(Z.transpose());
}

// Q_{a,b} with an explicit instrument count K.
inline double quad_form(const Eigen::MatrixXd& P, const Eigen::VectorXd& a,
                        const Eigen::VectorXd& b, int K) {
  const Eigen::Index n = P.rows();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) sum += a[i] * P(i, j) * b[j];
  return sum / std::sqrt(static_cast<double>(K));
}

struct Gamma6 {
  double phi1 = 0, phi12 = 0, phi13 = 0, psi = 0, tau = 0, upsilon = 0;
};

inline Gamma6 standard_gamma(const Eigen::MatrixXd& P, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& e, int K) {
  const Eigen::Index n = P.rows();
  Gamma6 g;
  for (Eigen::Index i = 0; i < n; ++i) {
    double loo = 0.0;  // sum_{j != i} P_ij x_j
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) loo += P(i, j) * x[j];
    g.psi += loo * loo * e[i] * e[i];
    g.tau += loo * loo * x[i] * e[i];
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double p2 = P(i, j) * P(i, j);
      g.phi1 += 2.0 * p2 * e[i] * e[i] * e[j] * e[j];
      g.phi12 += p2 * (x[j] * e[j] * e[i] * e[i] + x[i] * e[i] * e[j] * e[j]);
      g.phi13 += 2.0 * p2 * x[i] * e[i] * x[j] * e[j];
      g.psi += p2 * x[i] * e[i] * x[j] * e[j];
      g.tau += p2 * x[i] * x[i] * x[j] * e[j];
      g.upsilon += 2.0 * p2 * x[i] * x[i] * x[j] * x[j];
    }
  }
  const double K_ = static_cast<double>(K);
  g.phi1 /= K_;
  g.phi12 /= K_;
  g.phi13 /= K_;
  g.psi /= K_;
  g.tau /= K_;
  g.upsilon /= K_;
  return g;
}

inline Gamma6 crossfit_gamma(const Eigen::MatrixXd& P, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& e, int K) {
  const Eigen::Index n = P.rows();
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - P;
  const Eigen::VectorXd me = M * e;
  const Eigen::VectorXd mx = M * x;
  Gamma6 g;
  for (Eigen::Index i = 0; i < n; ++i) {
    double loo = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) loo += P(i, j) * x[j];
    g.psi += loo * loo * e[i] * me[i] / M(i, i);
    g.tau += loo * loo * (e[i] * mx[i] / (2.0 * M(i, i)) + x[i] * me[i] / (2.0 * M(i, i)));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double pt2 =
          P(i, j) * P(i, j) / (M(i, i) * M(j, j) + M(i, j) * M(i, j));
      g.phi1 += 2.0 * pt2 * (e[i] * me[i]) * (e[j] * me[j]);
      g.phi12 += pt2 * ((e[j] * mx[j]) * (e[i] * me[i]) +
                        (e[i] * mx[i]) * (e[j] * me[j]));
      g.phi13 += 2.0 * pt2 * (e[i] * mx[i]) * (e[j] * mx[j]);
      g.psi += pt2 * (e[i] * mx[i]) * (e[j] * mx[j]);
      g.tau += pt2 * (x[i] * mx[i]) * (e[j] * mx[j]);
      g.upsilon += 2.0 * pt2 * (x[i] * mx[i]) * (x[j] * mx[j]);
    }
  }
  const double K_ = static_cast<double>(K);
  g.phi1 /= K_;
  g.phi12 /= K_;
  g.phi13 /= K_;
  g.psi /= K_;
  g.tau /= K_;
  g.upsilon /= K_;
  return g;
}

inline Gamma6 population_gamma(const Eigen::MatrixXd& P,
                               const Eigen::VectorXd& sigma2,
                               const Eigen::VectorXd& eta2,
                               const Eigen::VectorXd& gam,
                               const Eigen::VectorXd& pi, int K) {
  const Eigen::Index n = P.rows();
  Gamma6 g;
  for (Eigen::Index i = 0; i < n; ++i) {
    double w = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) w += P(i, j) * pi[j];
    g.psi += w * w * sigma2[i];
    g.tau += 2.0 * w * w * gam[i];
    g.upsilon += 4.0 * w * w * eta2[i];
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double p2 = P(i, j) * P(i, j);
      g.phi1 += 2.0 * p2 * sigma2[i] * sigma2[j];
      g.phi12 += p2 * (gam[j] * sigma2[i] + gam[i] * sigma2[j]);
      g.phi13 += 2.0 * p2 * gam[i] * gam[j];
      g.psi += p2 * (eta2[i] * sigma2[j] + gam[i] * gam[j]);
      g.tau += 2.0 * p2 * eta2[i] * gam[j];
      g.upsilon += 2.0 * p2 * eta2[i] * eta2[j];
    }
  }
  const double K_ = static_cast<double>(K);
  g.phi1 /= K_;
  g.phi12 /= K_;
  g.phi13 /= K_;
  g.psi /= K_;
  g.tau /= K_;
  g.upsilon /= K_;
  return g;
}

// P((Z + m)^2 >= c) for standard normal Z.
inline double noncentral_chisq1_sf(double m, double c) {
  const double s = std::sqrt(c);
  return manyiv::norm_cdf(-(s - m)) + manyiv::norm_cdf(-(s + m));
}

inline Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index k,
                                     manyiv::Rng& rng) {
  Eigen::MatrixXd m(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) m(i, j) = rng.normal();
  return m;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, manyiv::Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace oracle
