#pragma once

#include <cstdint>
#include <vector>

#include "manyiv/limit_experiment.hpp"
#include "manyiv/statistics.hpp"
#include "manyiv/variance.hpp"

namespace manyiv {

enum class MuMethod { pp, krs };

struct SelectionConfig {
  double p1 = 0.01;
  double p2 = 1.1;
  int t_grid = 16;           // points per trigonometric axis
  int delta_grid_size = 31;  // alternatives scanned over B - beta0
  MCConfig mc;
  double a_bar = 0.999;      // upper bound of a1 + a2
  double slack_n = 2000;     // sample size behind the "+1/n" slack
  Interval b_space{-0.5, 0.5};

  void validate() const;
};

// Plug-in noncentrality proxies from r = D^2 / sigma_D^2.
double mu_proxy_pp(double d_hat, double sigma_d_hat);
double mu_proxy_krs(double d_hat, double sigma_d_hat, bool* fallback = nullptr);
// The shrunk noncentrality r_krs itself; `fallback` reports the switch to
// r - 1 when the alternating series cancels catastrophically.
double krs_shrinkage(double r_hat, bool* fallback = nullptr);

struct LowerBoundA {
  double value = 0;
  bool rho_zero = false;  // rho = 0 degrades the bound to 0
};
LowerBoundA lower_bound_a(double mu_proxy, const GammaHat& gamma, double c_b,
                          double cmax, const SelectionConfig& cfg);

struct GridPoint {
  Weights w;
  int i1 = 0, i2 = 0;  // indices along (t1, t2), ascending
  double t1 = 0, t2 = 0;
};

// a1 = sin^2(t1), a2 = cos^2(t1) sin^2(t2); t1 spans
// [arcsin(sqrt(lower)), pi/2], t2 spans [0, pi/2]; points beyond the
// a_bar-simplex are clipped onto it.
std::vector<GridPoint> weight_grid(double lower, const SelectionConfig& cfg);

struct SelectionDiagnostics {
  double f_s = 0;         // mu_D proxy actually used
  double sigma_d = 0;
  double r_hat = 0;
  double d_hat = 0;
  double a_lower = 0;
  double c_b = 0;
  double cmax = 0;
  double crit = 0;        // critical value at the selected weights
  double q_min = 0;       // min regret + 1/n
  double xi_bound = 0;    // q_min + iterated-logarithm slack
  int xi_size = 0;
  int selected_index = 0; // 1-based position inside Xi
  int saturated_deltas = 0;
  bool rho_zero = false;
  bool krs_fallback = false;
  std::vector<double> q_surface;  // regret per grid point, (t1,t2) order
  std::vector<double> envelope;   // best attainable power per delta
  std::vector<GridPoint> grid;
};

struct WeightSelection {
  Weights w;
  SelectionDiagnostics diag;
};

// Full minimax search: envelope powers over the delta grid, regret surface,
// slackness set Xi via the iterated-logarithm bound, median element pick.
WeightSelection minimax_weights(const StatBundle& bundle, const GammaHat& gamma,
                                double beta0, Interval b_space, MuMethod method,
                                double alpha, const SelectionConfig& cfg);

// Same search keyed directly by the proxy value f (the only data-dependent
// input once gamma is fixed); lets simulation harnesses reuse one DrawMatrix
// across replications.
WeightSelection minimax_weights_for_proxy(double f, const GammaHat& gamma,
                                          double beta0, Interval b_space,
                                          double alpha,
                                          const SelectionConfig& cfg,
                                          const DrawMatrix& draws);

}  // namespace manyiv
