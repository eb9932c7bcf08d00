#include <doctest.h>

#include "manyiv/errors.hpp"
#include "manyiv/limit_experiment.hpp"
#include "manyiv/simulation.hpp"
#include "manyiv/weight_selection.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace manyiv;
using testutil::close;
using testutil::throws_with;

namespace {

DrawMatrix big_draws(std::uint64_t seed = 2024) {
  MCConfig mc;
  mc.draws = 200000;
  mc.seed = seed;
  return make_draws(mc);
}

}  // namespace

TEST_CASE("crit_value recovers chi-squared quantiles") {
  const DrawMatrix d = big_draws();
  for (double rho : {0.0, 0.5, 0.9})
    CHECK(close(crit_value(Weights{0, 0}, rho, 0.05, d), 3.8415, 0.06));
  CHECK(close(crit_value(Weights{0.5, 0}, 0.0, 0.05, d), 2.9957, 0.05));
}

TEST_CASE("the (0,0) corner statistic is Z2^2 regardless of rho") {
  MCConfig mc;
  mc.draws = 2000;
  mc.seed = 123;
  const DrawMatrix d = make_draws(mc);
  const double c = crit_value(Weights{0, 0}, 0.3, 0.05, d);
  CHECK(c == crit_value(Weights{0, 0}, -0.8, 0.05, d));
  CHECK(c == crit_value(Weights{0, 0}, 0.0, 0.05, d));
}

TEST_CASE("crit_value sign symmetry under antithetic pairing") {
  MCConfig mc;
  mc.draws = 2000;
  mc.seed = 9;
  const DrawMatrix d = make_draws(mc);
  const Weights w{0.2, 0.3};
  CHECK(crit_value(w, 0.6, 0.05, d) == crit_value(w, -0.6, 0.05, d));
  CHECK(crit_value(w, 0.35, 0.01, d) == crit_value(w, -0.35, 0.01, d));
}

TEST_CASE("make_draws validation") {
  MCConfig mc;
  mc.draws = 500;
  CHECK_THROWS_AS((void)make_draws(mc), DataError);
  mc.draws = 2001;
  mc.antithetic = true;
  CHECK_THROWS_AS((void)make_draws(mc), DataError);
}

TEST_CASE("crit_value_max basics") {
  MCConfig mc;
  mc.draws = 4000;
  mc.seed = 5;
  const DrawMatrix d = make_draws(mc);
  const std::vector<Weights> single{Weights{0, 0}};
  CHECK(crit_value_max(0.0, 0.05, d, single) ==
        crit_value(Weights{0, 0}, 0.0, 0.05, d));
  SelectionConfig cfg;
  std::vector<Weights> grid;
  for (const GridPoint& p : weight_grid(0.0, cfg)) grid.push_back(p.w);
  CHECK(crit_value_max(0.0, 0.05, d, grid) >=
        crit_value(Weights{0, 0}, 0.0, 0.05, d));
  CHECK_THROWS_AS((void)crit_value_max(0.0, 0.05, d, {}), DataError);
}

TEST_CASE("coeff_c closed forms") {
  {
    const GammaHat g = GammaHat::from_components(1.2, 0.5, 0.3, 1.1, 0.2, 1.3);
    const DeviationCoefs dc = coeff_c(0.0, g);
    CHECK(dc.c1 == 0.0);
    CHECK(dc.c2 == 0.0);
  }
  {
    // phi13 = tau = 0 so the bracket is 1; C2 vanishes at
    // delta = sqrt(phi1/psi)/rho.
    const GammaHat g = GammaHat::from_components(1.0, 0.5, 0, 1.0, 0, 1.0);
    const double dstar = 1.0 / g.rho;
    const DeviationCoefs dc = coeff_c(dstar, g);
    CHECK(close(dc.bracket, 1.0, 1e-12));
    CHECK(close(dc.c2, 0.0, 1e-12));
  }
  {
    // Values against a hand 2x2 solve at rho = 0.4, delta = 1.
    const GammaHat g = limit_design_gamma(0.4);
    const double delta = 1.0;
    Eigen::Matrix2d sigma;
    sigma << g.phi1, g.phi12, g.phi12, g.psi;
    const Eigen::Vector2d sol = sigma.fullPivLu().solve(Eigen::Vector2d(g.phi13, g.tau));
    const double bracket = 1.0 - (delta * delta * sol[0] + delta * sol[1]);
    const double want_c1 = delta * delta / std::sqrt(g.phi1) / bracket;
    const double want_c2 = (delta / std::sqrt(g.psi) -
                            g.rho * delta * delta / std::sqrt(g.phi1)) /
                           (std::sqrt(1 - g.rho * g.rho) * bracket);
    const DeviationCoefs dc = coeff_c(delta, g);
    CHECK(close(dc.c1, want_c1, 1e-12));
    CHECK(close(dc.c2, want_c2, 1e-12));
  }
  {
    // Singular bracket errors: rho = 0.2 design at delta = 2.
    const GammaHat g = limit_design_gamma(0.2);
    CHECK(throws_with<NumericalError>([&] { (void)coeff_c(2.0, g); },
                                      "deviation coefficient singular"));
  }
}

TEST_CASE("c_b_sup") {
  {
    const GammaHat g = GammaHat::from_components(1.0, 0.5, 0, 1.0, 0, 1.0);
    CHECK(c_b_sup(g, {-1.0, 0.0, 1.0}) == 1.0);
    CHECK(c_b_sup(g, {0.0}) == 1.0);
  }
  {
    const GammaHat g = limit_design_gamma(0.7);
    std::vector<double> grid;
    for (int i = 0; i < 31; ++i) grid.push_back(-2.0 + 4.0 * i / 30);
    double direct = 0.0;
    for (double d : grid) {
      const double b = bracket_term(d, g);
      direct = std::max(direct, b * b);
    }
    CHECK(c_b_sup(g, grid) == direct);
    CHECK_THROWS_AS((void)c_b_sup(g, {}), DataError);
  }
}

TEST_CASE("power_estimate at the null and against the noncentral oracle") {
  const GammaHat g = GammaHat::from_components(1.0, 0, 0, 1.0, 0, 1.0);
  MCConfig mc;
  mc.draws = 10000;
  mc.seed = 77;
  const DrawMatrix d = make_draws(mc);
  for (const Weights& w :
       {Weights{0.3, 0.2}, Weights{0, 0}, Weights{0.9, 0}, Weights{0.1, 0.7}}) {
    for (double rho : {0.0, 0.6}) {
      const GammaHat gr = GammaHat::from_components(1.0, rho, 0, 1.0, 0, 1.0);
      const double p = power_estimate(w, 0.0, 1.7, gr, 0.05, d);
      CHECK(close(p, 0.05, 3.0 * std::sqrt(0.05 * 0.95 / 10000.0)));
    }
  }
  {
    // w = (0,0): the statistic is Z^2(C2 mu); with rho = 0, bracket = 1 and
    // C2(delta) = delta / sqrt(psi), so delta = 1, mu = 2 puts the mean at 2.
    const double p = power_estimate(Weights{0, 0}, 1.0, 2.0, g, 0.05, d);
    const double want = oracle::noncentral_chisq1_sf(2.0, chisq1_quantile(0.95));
    CHECK(close(want, 0.516, 0.001));
    CHECK(close(p, want, 0.02));
  }
  {
    const double p = power_estimate(Weights{0, 0}, 2.5, 2.0, g, 0.05, d);
    CHECK(p >= 0.99);  // noncentrality 5
  }
}

TEST_CASE("power dip at delta-star and its repair by mixing") {
  const GammaHat g = limit_design_gamma(0.7);
  MCConfig mc;
  mc.draws = 2000;
  mc.seed = 3;
  const DrawMatrix d = make_draws(mc);
  const double dstar = 1.0 / 0.7;
  const double p_lmstar = power_estimate(Weights{0, 0}, dstar, 6.0, g, 0.05, d);
  CHECK(p_lmstar <= 0.05 + 0.02);
  const double p_mix = power_estimate(Weights{0.5, 0.25}, dstar, 6.0, g, 0.05, d);
  CHECK(p_mix >= 0.5);
}

TEST_CASE("eig2 closed forms and the rotation identity") {
  {
    const Eig2 e = eig2(Weights{0, 0}, 0.4);
    CHECK(e.nu1 == 1.0);
    CHECK(e.nu2 == 0.0);
  }
  {
    const Eig2 e = eig2(Weights{0.3, 0}, 0.8);
    CHECK(close(e.nu1, 0.7, 1e-12));
    CHECK(close(e.nu2, 0.3, 1e-12));
  }
  {
    const Eig2 e = eig2(Weights{0, 0.5}, 1.0 / std::sqrt(2.0));
    CHECK(close(e.nu1, 0.8535534, 1e-7));
    CHECK(close(e.nu2, 0.1464466, 1e-7));
  }
  Rng rng(55);
  for (int rep = 0; rep < 50; ++rep) {
    const double rho = 1.8 * rng.uniform() - 0.9;
    Weights w;
    w.a1 = rng.uniform() * 0.8;
    w.a2 = rng.uniform() * (0.98 - w.a1);
    const Eig2 e = eig2(w, rho);
    CHECK(close(e.nu1 + e.nu2, 1.0, 1e-12));
    CHECK(e.nu1 >= e.nu2);
    CHECK(e.nu2 >= 0.0);
    // Reconstruction.
    Eigen::Matrix2d m;
    const double q = std::sqrt(1 - rho * rho);
    m << w.a1 + w.a2 * rho * rho, w.a2 * rho * q, w.a2 * rho * q,
        1 - w.a1 - w.a2 * rho * rho;
    Eigen::Matrix2d nu = Eigen::Matrix2d::Zero();
    nu(0, 0) = e.nu1;
    nu(1, 1) = e.nu2;
    CHECK((e.rotation * nu * e.rotation.transpose() - m).cwiseAbs().maxCoeff() <=
          1e-12);
    CHECK((e.rotation * e.rotation.transpose() - Eigen::Matrix2d::Identity())
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
    // Rotated statistic equals the direct combination draw by draw.
    for (int k = 0; k < 5; ++k) {
      const double n1 = rng.normal(), n2s = rng.normal();
      const double direct = w.a1 * n1 * n1 +
                            w.a2 * std::pow(rho * n1 + q * n2s, 2) +
                            (1 - w.a1 - w.a2) * n2s * n2s;
      const Eigen::Vector2d t = e.rotation.transpose() * Eigen::Vector2d(n1, n2s);
      const double rotated = e.nu1 * t[0] * t[0] + e.nu2 * t[1] * t[1];
      CHECK(close(direct, rotated, 1e-10 * (1 + std::fabs(direct))));
    }
  }
}
