#include "manyiv/variance.hpp"

#include <array>
#include <cmath>

#include "manyiv/errors.hpp"
#include "sweep_detail.hpp"

namespace manyiv {

using detail::pair_sweep;

namespace {

GammaHat finalize(double phi1, double phi12, double phi13, double psi,
                  double tau, double upsilon) {
  if (!(phi1 > 0.0) || !(psi > 0.0) || !(upsilon > 0.0))
    throw NumericalError("degenerate variance estimate");
  return GammaHat::from_components(phi1, phi12, phi13, psi, tau, upsilon);
}

}  // namespace

GammaHat GammaHat::from_components(double phi1, double phi12, double phi13,
                                   double psi, double tau, double upsilon) {
  GammaHat g;
  g.phi1 = phi1;
  g.phi12 = phi12;
  g.phi13 = phi13;
  g.psi = psi;
  g.tau = tau;
  g.upsilon = upsilon;
  g.rho = phi12 / std::sqrt(phi1 * psi);
  g.validate();
  return g;
}

void GammaHat::validate() const {
  if (!(phi1 > 0.0) || !(psi > 0.0) || !(upsilon > 0.0))
    throw NumericalError("degenerate variance estimate");
  if (!std::isfinite(rho) || std::fabs(rho) >= 1.0 - 1e-8)
    throw NumericalError("degenerate orthogonalization: |rho| too close to 1");
}

GammaComponents standard_gamma_components(const ProjectionContext& ctx,
                                          const IVDataset& data, double beta0,
                                          int threads) {
  if (data.W) throw DataError("standard_gamma expects partialled-out data");
  const Eigen::Index n = ctx.n();
  if (data.n() != n) throw DataError("dataset/context size mismatch");
  const double K = static_cast<double>(ctx.k());

  const Eigen::VectorXd e = data.y - beta0 * data.x;
  const Eigen::VectorXd e2 = e.cwiseProduct(e);
  const Eigen::VectorXd xe = data.x.cwiseProduct(e);
  const Eigen::VectorXd x2 = data.x.cwiseProduct(data.x);

  const std::array<const double*, 5> f{e2.data(), e2.data(), xe.data(),
                                       x2.data(), x2.data()};
  const std::array<const double*, 5> g{e2.data(), xe.data(), xe.data(),
                                       xe.data(), x2.data()};
  const auto s = pair_sweep<5>(ctx, f, g, /*crossfit=*/false, threads);

  // sum_{j != i} P_ij X_j = (P x)_i - h_i x_i
  const Eigen::VectorXd px = ctx.apply_p(data.x);
  const Eigen::VectorXd wloo = px - ctx.leverages().cwiseProduct(data.x);
  const double wee = (wloo.array().square() * e2.array()).sum();
  const double wxe = (wloo.array().square() * xe.array()).sum();

  GammaComponents out;
  out.phi1 = 2.0 * s[0] / K;
  out.phi12 = 2.0 * s[1] / K;
  out.phi13 = 2.0 * s[2] / K;
  out.psi = (wee + s[2]) / K;
  out.tau = (wxe + s[3]) / K;
  out.upsilon = 2.0 * s[4] / K;
  return out;
}

GammaHat standard_gamma(const ProjectionContext& ctx, const IVDataset& data,
                        double beta0, int threads) {
  const GammaComponents g = standard_gamma_components(ctx, data, beta0, threads);
  return finalize(g.phi1, g.phi12, g.phi13, g.psi, g.tau, g.upsilon);
}

GammaComponents crossfit_gamma_components(const ProjectionContext& ctx,
                                          const IVDataset& data, double beta0,
                                          int threads) {
  if (data.W) throw DataError("crossfit_gamma expects partialled-out data");
  const Eigen::Index n = ctx.n();
  if (data.n() != n) throw DataError("dataset/context size mismatch");
  const double K = static_cast<double>(ctx.k());

  const Eigen::VectorXd e = data.y - beta0 * data.x;
  // Per-row leave-in products from two O(nK) passes: (M v)_i = v_i - (P v)_i.
  const Eigen::VectorXd pe = ctx.apply_p(e);
  const Eigen::VectorXd px = ctx.apply_p(data.x);
  const Eigen::VectorXd me = e - pe;
  const Eigen::VectorXd mx = data.x - px;
  const Eigen::VectorXd ue = e.cwiseProduct(me);        // e_i(b0) M_i e(b0)
  const Eigen::VectorXd ux = e.cwiseProduct(mx);        // e_i(b0) M_i X
  const Eigen::VectorXd xu = data.x.cwiseProduct(me);   // X_i M_i e(b0)
  const Eigen::VectorXd xx = data.x.cwiseProduct(mx);   // X_i M_i X

  const std::array<const double*, 5> f{ue.data(), ue.data(), ux.data(),
                                       xx.data(), xx.data()};
  const std::array<const double*, 5> g{ue.data(), ux.data(), ux.data(),
                                       ux.data(), xx.data()};
  const auto s = pair_sweep<5>(ctx, f, g, /*crossfit=*/true, threads);

  const Eigen::VectorXd wloo = px - ctx.leverages().cwiseProduct(data.x);
  const Eigen::ArrayXd mii = 1.0 - ctx.leverages().array();
  const double wpsi = (wloo.array().square() * ue.array() / mii).sum();
  const double wtau =
      (wloo.array().square() * (ux.array() + xu.array()) / (2.0 * mii)).sum();

  GammaComponents out;
  out.phi1 = 2.0 * s[0] / K;
  out.phi12 = 2.0 * s[1] / K;
  out.phi13 = 2.0 * s[2] / K;
  out.psi = (wpsi + s[2]) / K;
  out.tau = (s[3] + wtau) / K;
  out.upsilon = 2.0 * s[4] / K;
  return out;
}

GammaHat crossfit_gamma(const ProjectionContext& ctx, const IVDataset& data,
                        double beta0, int threads) {
  const GammaComponents g = crossfit_gamma_components(ctx, data, beta0, threads);
  return finalize(g.phi1, g.phi12, g.phi13, g.psi, g.tau, g.upsilon);
}

GammaHat estimate_gamma(VarianceKind kind, const ProjectionContext& ctx,
                        const IVDataset& data, double beta0, int threads) {
  return kind == VarianceKind::standard
             ? standard_gamma(ctx, data, beta0, threads)
             : crossfit_gamma(ctx, data, beta0, threads);
}

Eigen::Vector2d gamma_projection_coefs(const GammaHat& gamma) {
  const double det = gamma.phi1 * gamma.psi - gamma.phi12 * gamma.phi12;
  if (!(gamma.phi1 > 0.0) || !(det > 0.0))
    throw NumericalError("gamma block not PD");
  Eigen::Vector2d c;
  c[0] = (gamma.psi * gamma.phi13 - gamma.phi12 * gamma.tau) / det;
  c[1] = (gamma.phi1 * gamma.tau - gamma.phi12 * gamma.phi13) / det;
  return c;
}

double sigma_d(const GammaHat& gamma) {
  gamma.validate();
  const Eigen::Vector2d c = gamma_projection_coefs(gamma);
  const double schur = gamma.upsilon - (gamma.phi13 * c[0] + gamma.tau * c[1]);
  if (schur < -1e-10) throw NumericalError("gamma not PSD");
  return std::sqrt(std::max(schur, 0.0));
}

}  // namespace manyiv
