#include "manyiv/statistics.hpp"

#include <cmath>

#include "manyiv/errors.hpp"

namespace manyiv {

QTriplet q_triplet(const ProjectionContext& ctx, const IVDataset& data,
                   double beta0) {
  if (data.W) throw DataError("q_triplet expects partialled-out data");
  const Eigen::VectorXd e = data.y - beta0 * data.x;
  QTriplet q;
  q.q_ee = ctx.quad_form(e, e);
  q.q_xe = ctx.quad_form(data.x, e);
  q.q_xx = ctx.quad_form(data.x, data.x);
  return q;
}

StatBundle stat_bundle_from(const QTriplet& q, const GammaHat& gamma) {
  gamma.validate();
  if (std::fabs(gamma.rho) >= 1.0 - 1e-8)
    throw NumericalError("degenerate orthogonalization: |rho| too close to 1");
  StatBundle b;
  b.q = q;
  b.gamma = gamma;
  b.ar = q.q_ee / std::sqrt(gamma.phi1);
  b.lm = q.q_xe / std::sqrt(gamma.psi);
  b.lm_star = (b.lm - gamma.rho * b.ar) / std::sqrt(1.0 - gamma.rho * gamma.rho);
  const Eigen::Vector2d c = gamma_projection_coefs(gamma);
  b.d_hat = q.q_xx - (q.q_ee * c[0] + q.q_xe * c[1]);
  b.f_tilde = q.q_xx / gamma.upsilon;
  return b;
}

StatBundle stat_bundle(const ProjectionContext& ctx, const IVDataset& data,
                       double beta0, const GammaHat& gamma) {
  return stat_bundle_from(q_triplet(ctx, data, beta0), gamma);
}

}  // namespace manyiv
