#pragma once

// Internal kernels shared by limit_experiment and the weight-selection
// engine. Both must produce bit-identical powers and critical values for
// the same draws, so the arithmetic lives in one place.

#include <vector>

#include "manyiv/limit_experiment.hpp"

namespace manyiv::detail {

void fill_components(const DrawMatrix& d, double rho, double m1, double m2,
                     std::vector<double>& A, std::vector<double>& B,
                     std::vector<double>& C);

int count_ge(const double* A, const double* B, const double* C, int R,
             double a1, double a2, double a3, double c);

double quantile_of_combo(const std::vector<double>& A,
                         const std::vector<double>& B,
                         const std::vector<double>& C, const Weights& w,
                         double alpha, std::vector<double>& scratch);

}  // namespace manyiv::detail
