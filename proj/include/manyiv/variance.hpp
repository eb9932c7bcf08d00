#pragma once

#include <Eigen/Dense>

#include "manyiv/dataset.hpp"
#include "manyiv/projection.hpp"

namespace manyiv {

enum class VarianceKind { standard, crossfit };

// The seven-component variance bundle gamma(beta0).
// rho is always phi12 / sqrt(phi1 * psi); construction validates
// phi1, psi, upsilon > 0 and |rho| < 1 - 1e-8.
struct GammaHat {
  double phi1 = 0, phi12 = 0, phi13 = 0, psi = 0, tau = 0, upsilon = 0;
  double rho = 0;

  static GammaHat from_components(double phi1, double phi12, double phi13,
                                  double psi, double tau, double upsilon);
  void validate() const;
};

// Appendix-style double-sum estimators with weights P_ij^2 and plug-in
// residuals e_i(beta0) = y_i - x_i * beta0.
GammaHat standard_gamma(const ProjectionContext& ctx, const IVDataset& data,
                        double beta0, int threads = 1);

// Cross-fit estimators with weights P~^2_ij = P_ij^2 / (M_ii M_jj + M_ij^2)
// and leave-out products e_i(beta0) * (M e(beta0))_i etc.
GammaHat crossfit_gamma(const ProjectionContext& ctx, const IVDataset& data,
                        double beta0, int threads = 1);

GammaHat estimate_gamma(VarianceKind kind, const ProjectionContext& ctx,
                        const IVDataset& data, double beta0, int threads = 1);

// The six raw sums before positivity/correlation validation; the public
// estimators are these plus GammaHat::from_components.
struct GammaComponents {
  double phi1 = 0, phi12 = 0, phi13 = 0, psi = 0, tau = 0, upsilon = 0;
};
GammaComponents standard_gamma_components(const ProjectionContext& ctx,
                                          const IVDataset& data, double beta0,
                                          int threads = 1);
GammaComponents crossfit_gamma_components(const ProjectionContext& ctx,
                                          const IVDataset& data, double beta0,
                                          int threads = 1);

// sigma_D = sqrt(Upsilon - (phi13,tau) Sigma^{-1} (phi13,tau)^T); the Schur
// complement may only be clamped within -1e-10 of zero, otherwise errors.
double sigma_d(const GammaHat& gamma);

// Solves Sigma^{-1} (phi13, tau)^T for Sigma = [[phi1,phi12],[phi12,psi]]
// in closed form; shared by D-hat, sigma_d and the deviation coefficients.
Eigen::Vector2d gamma_projection_coefs(const GammaHat& gamma);

}  // namespace manyiv
