#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "manyiv/dataset.hpp"
#include "manyiv/inference.hpp"
#include "manyiv/rng.hpp"
#include "manyiv/weight_selection.hpp"

namespace manyiv {

// ---- Gaussian limit experiment ----

// Covariance design of the limit study: Phi1 = Psi = Upsilon = 1,
// Phi12 = Phi13 = tau = rho.
GammaHat limit_design_gamma(double rho);

// Maps the base covariance to gamma(beta0) for Delta = beta - beta0:
//   Phi1(b0)  = D^4 U + 4 D^3 t + D^2 (4 P + 2 F13) + 4 D F12 + F1, ...
GammaHat gamma_at_null(const GammaHat& base, double delta);

struct LimitDraw {
  double ar = 0, lm = 0;
  double q_ee = 0, q_xe = 0, q_xx = 0;  // the beta0-triplet behind them
};

// One draw of the limit statistics at true beta, null beta0: trivariate
// normal with the base covariance, shifted by (D^2 C, D C, C) through the
// triangular transformation, standardized by the true gamma(beta0).
LimitDraw draw_limit_statistics(const GammaHat& base, double conc, double beta,
                                double beta0, Rng& rng);

struct LimitSimConfig {
  double rho = 0.2;
  double conc = 6.0;              // concentration parameter C
  Interval b_space{0, 0};         // defaults to [-6/C, 6/C] when lo == hi
  int beta_points = 31;
  std::vector<double> beta_override;  // explicit beta values when nonempty
  double beta0 = 0.0;
  int reps = 5000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  SelectionConfig sel;
  int threads = 1;
  int proxy_map_nodes = 161;  // weight-map resolution over the f axis

  Interval effective_b() const {
    if (b_space.lo < b_space.hi) return b_space;
    return Interval{-6.0 / conc, 6.0 / conc};
  }
};

struct PowerRow {
  std::string test;
  double beta = 0;
  double rejection_rate = 0;
  int reps = 0;
  double mc_se = 0;
};

// Rejection frequencies of AR / LM / LM* / CLC(pp) / CLC(krs) over the beta
// grid, all standardized by the true gamma(beta0). Weight selection is
// precomputed per cell on a grid of proxy values f (a step-function
// approximation of the selection map) and shared across replications.
std::vector<PowerRow> run_limit_power_study(const LimitSimConfig& cfg);

std::string power_table_csv(const std::vector<PowerRow>& rows);

// ---- Calibrated Poisson DGPs ----

struct Calibration {
  Eigen::MatrixXd Z;        // raw instrument dummies, n x K
  Eigen::VectorXd omega;    // residual scale per observation
  Eigen::VectorXd sbar;     // cell means of the endogenous variable
  double gamma0 = 0;        // projection of sbar on (1, Z)
  Eigen::VectorXd gamma_z;
};

// CSV with named columns sbar, omega, z1..zK; the projection coefficients
// are fit here by least squares.
Calibration load_calibration_csv(const std::string& path);

// Grouped-dummy design with heteroskedastic omega; stands in for the census
// calibration in tests. effect_spread scales the first-stage group effects:
// ~1 reproduces the weak-to-moderate concentration of the calibrated
// designs, ~0.35 keeps Pi'Pi/K well inside the variance estimators'
// consistency regime.
Calibration synthetic_calibration(int n, int K, std::uint64_t seed,
                                  double effect_spread = 1.0);

struct CalibratedDgpConfig {
  Calibration cal;
  int variant = 1;  // 2: kappa1 = 2.7 and floor(Poisson(2 mu)/2)
  double kappa1 = 1.7;
  double kappa2 = 0.1;
  double prune_threshold = 5.0;
  double beta0 = 0.1;
  Interval b_space{-0.5, 0.5};
  std::vector<double> beta_grid;
  int reps = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  SelectionConfig sel;
  int threads = 1;
};

// mu_i = max(1, gamma0 + gamma_z . Z_i + kappa1 nu_i), endogenous variable
// Poisson(mu) (variant 1) or floor(Poisson(2 mu)/2) (variant 2), outcome
// beta * s + omega (nu + kappa2 xi). Instruments with column sums below the
// prune threshold are dropped, then everything is demeaned (intercept-only
// control).
IVDataset draw_calibrated_sample(const CalibratedDgpConfig& cfg, double beta,
                                 Rng& rng);

// Same draw before the intercept is partialled out (W = ones attached).
IVDataset draw_calibrated_sample_raw(const CalibratedDgpConfig& cfg, double beta,
                                     Rng& rng);

// Per-observation population moments for oracle checks.
struct SimTruth {
  Eigen::VectorXd sigma2;   // Var e_i
  Eigen::VectorXd eta2;     // Var V_i
  Eigen::VectorXd gamma_ev; // Cov(e_i, V_i)
  Eigen::VectorXd pi;       // first-stage means (demeaned scale)

  void validate() const;
};

// Closed-form moments of DGP variant 1 (normal-censored mean, Poisson
// mixture); pi is centered to match the demeaned data the estimators see.
SimTruth dgp_truth(const CalibratedDgpConfig& cfg);

// Exact finite-n evaluation of the six population variance components from
// SimTruth and the hat matrix.
GammaHat oracle_variance_components(const ProjectionContext& ctx,
                                    const SimTruth& truth);

// Rejection frequencies of clc_pp/clc_krs/ar/lm/lm_star/two_step/lm_mo on
// the calibrated DGP (lm_mo = jackknife LM with the standard variance
// estimator; everything else cross-fit).
std::vector<PowerRow> run_dgp_power_study(const CalibratedDgpConfig& cfg);

}  // namespace manyiv
