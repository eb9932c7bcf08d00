// Statistical properties of the variance estimators: consistency against
// the population components on designs with known moments.

#include <doctest.h>

#include <cmath>

#include "manyiv/rng.hpp"
#include "manyiv/simulation.hpp"
#include "manyiv/variance.hpp"
#include "test_util.hpp"

using namespace manyiv;
using testutil::close;

namespace {

Eigen::MatrixXd balanced_dummies(int groups, int per_group) {
  const int n = groups * per_group;
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, groups);
  for (int g = 0; g < groups; ++g)
    for (int j = 0; j < per_group; ++j) Z(g * per_group + j, g) = 1.0;
  return Z;
}

struct MeanGamma {
  double phi1 = 0, phi12 = 0, phi13 = 0, psi = 0, tau = 0, upsilon = 0;
  void add(const GammaComponents& g, double w) {
    phi1 += w * g.phi1;
    phi12 += w * g.phi12;
    phi13 += w * g.phi13;
    psi += w * g.psi;
    tau += w * g.tau;
    upsilon += w * g.upsilon;
  }
};

}  // namespace

TEST_CASE("estimator means track the population components (200 reps, n=2000)") {
  // Homoskedastic design: sigma^2 = eta^2 = 1, gamma_ev = 0, balanced
  // dummies with a +-0.3 first stage.
  const int K = 100, m = 20;  // n = 2000
  const int n = K * m;
  const Eigen::MatrixXd Z = balanced_dummies(K, m);
  const ProjectionContext ctx = build_projection(Z);
  SimTruth truth;
  truth.sigma2 = Eigen::VectorXd::Ones(n);
  truth.eta2 = Eigen::VectorXd::Ones(n);
  truth.gamma_ev = Eigen::VectorXd::Zero(n);
  // Pure noise first stage: the example's population targets are the
  // P^2 double sums alone.
  truth.pi = Eigen::VectorXd::Zero(n);
  const GammaHat pop = oracle_variance_components(ctx, truth);

  const int reps = 200;
  const double beta = 0.25;
  MeanGamma std_mean, cf_mean;
  IVDataset d;
  d.Z = Z;
  d.x.resize(n);
  d.y.resize(n);
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(derive_seed(90210, rep));
    for (int i = 0; i < n; ++i) {
      const double v = rng.normal();
      const double e = rng.normal();  // independent: gamma_ev = 0
      d.x[i] = truth.pi[i] + v;
      d.y[i] = beta * d.x[i] + e;
    }
    std_mean.add(standard_gamma_components(ctx, d, beta), 1.0 / reps);
    cf_mean.add(crossfit_gamma_components(ctx, d, beta), 1.0 / reps);
  }

  const double scale = std::sqrt(pop.phi1 * pop.psi);
  auto check_family = [&](const MeanGamma& got) {
    CHECK(close(got.phi1, pop.phi1, 0.10 * pop.phi1));
    CHECK(close(got.psi, pop.psi, 0.10 * pop.psi));
    CHECK(close(got.upsilon, pop.upsilon, 0.10 * pop.upsilon));
    // Zero targets: within 10% of the natural scale.
    CHECK(close(got.phi12, 0.0, 0.10 * scale));
    CHECK(close(got.phi13, 0.0, 0.10 * scale));
    CHECK(close(got.tau, 0.0, 0.10 * scale));
  };
  check_family(std_mean);
  check_family(cf_mean);
}

TEST_CASE("cross-fit and standard upsilon agree on balanced dummies") {
  const int K = 100, m = 20;
  const int n = K * m;
  const Eigen::MatrixXd Z = balanced_dummies(K, m);
  const ProjectionContext ctx = build_projection(Z);
  IVDataset d;
  d.Z = Z;
  d.x.resize(n);
  d.y.resize(n);
  Rng rng(4711);
  for (int i = 0; i < n; ++i) {
    d.x[i] = rng.normal();
    d.y[i] = 0.1 * d.x[i] + rng.normal();
  }
  const GammaComponents cf = crossfit_gamma_components(ctx, d, 0.1);
  const GammaComponents st = standard_gamma_components(ctx, d, 0.1);
  CHECK(close(cf.upsilon, st.upsilon, 0.10 * st.upsilon));
}

TEST_CASE("estimators track the oracle on the calibrated DGP (n=2000)") {
  CalibratedDgpConfig cfg;
  cfg.cal = synthetic_calibration(2000, 40, 1001, 0.35);
  cfg.seed = 31337;
  const double beta = 0.1;

  // Oracle components from the DGP's known moments and the pruned,
  // demeaned hat matrix.
  Rng pilot(derive_seed(cfg.seed, 0));
  const IVDataset pilot_d = draw_calibrated_sample(cfg, beta, pilot);
  const ProjectionContext ctx = build_projection(pilot_d.Z);
  const SimTruth truth = dgp_truth(cfg);
  const GammaHat pop = oracle_variance_components(ctx, truth);

  const int reps = 30;
  MeanGamma std_mean, cf_mean;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(derive_seed(cfg.seed, 100 + rep));
    const IVDataset d = draw_calibrated_sample(cfg, beta, rng);
    std_mean.add(standard_gamma_components(ctx, d, beta), 1.0 / reps);
    cf_mean.add(crossfit_gamma_components(ctx, d, beta), 1.0 / reps);
  }
  auto rel15 = [&](double got, double want) {
    CHECK(close(got, want, 0.15 * (std::fabs(want) +
                                   0.05 * std::sqrt(pop.phi1 * pop.psi))));
  };
  for (const MeanGamma* g : {&std_mean, &cf_mean}) {
    rel15(g->phi1, pop.phi1);
    rel15(g->phi12, pop.phi12);
    rel15(g->phi13, pop.phi13);
    rel15(g->psi, pop.psi);
    rel15(g->tau, pop.tau);
    rel15(g->upsilon, pop.upsilon);
  }
}
