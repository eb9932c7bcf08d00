#pragma once

#include "manyiv/dataset.hpp"
#include "manyiv/projection.hpp"
#include "manyiv/variance.hpp"

namespace manyiv {

// The three jackknife quadratic forms a test at beta0 can depend on.
struct QTriplet {
  double q_ee = 0;  // Q_{e(b0), e(b0)}
  double q_xe = 0;  // Q_{X, e(b0)}
  double q_xx = 0;  // Q_{X, X}
};

QTriplet q_triplet(const ProjectionContext& ctx, const IVDataset& data,
                   double beta0);

// All the test statistics evaluated at a candidate beta0.
struct StatBundle {
  double ar = 0;       // Q_ee / sqrt(phi1)
  double lm = 0;       // Q_xe / sqrt(psi)
  double lm_star = 0;  // (lm - rho * ar) / sqrt(1 - rho^2)
  double d_hat = 0;    // residual of Q_xx on (Q_ee, Q_xe)
  double f_tilde = 0;  // Q_xx / upsilon
  QTriplet q;
  GammaHat gamma;
};

StatBundle stat_bundle(const ProjectionContext& ctx, const IVDataset& data,
                       double beta0, const GammaHat& gamma);

// Same arithmetic from precomputed quadratic forms (used by the limit
// experiment harness, where no dataset exists).
StatBundle stat_bundle_from(const QTriplet& q, const GammaHat& gamma);

}  // namespace manyiv
