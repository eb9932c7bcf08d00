#pragma once

// Blockwise pairwise sweep shared by the variance estimators and the
// population-oracle components.

#include <array>
#include <string>
#include <vector>

#include "manyiv/errors.hpp"
#include "manyiv/parallel.hpp"
#include "manyiv/projection.hpp"

namespace manyiv::detail {

// sums[s] = sum_{i != j} w_ij f_s[i] g_s[j], with w_ij = P_ij^2 (standard)
// or P_ij^2 / (M_ii M_jj + M_ij^2) (cross-fit; M_ij = -P_ij off diagonal).
// Streams column blocks of P; per-block partials are reduced in block order
// so the result is identical for any thread count.
template <std::size_t S>
std::array<double, S> pair_sweep(const ProjectionContext& ctx,
                                 const std::array<const double*, S>& f,
                                 const std::array<const double*, S>& g,
                                 bool crossfit, int threads) {
  const Eigen::Index n = ctx.n();
  const Eigen::Index bs = ctx.block_size();
  const Eigen::Index nblocks = (n + bs - 1) / bs;
  const double* lev = ctx.leverages().data();
  const Eigen::MatrixXd* dense = ctx.dense_p();
  const Eigen::MatrixXd& U = ctx.basis();

  std::vector<std::array<double, S>> partials(static_cast<std::size_t>(nblocks));
  parallel_for(static_cast<std::size_t>(nblocks), threads, [&](std::size_t blk) {
    const Eigen::Index i0 = static_cast<Eigen::Index>(blk) * bs;
    const Eigen::Index cols = std::min(bs, n - i0);
    Eigen::MatrixXd pc;  // n x cols, column c holds P_{., i0+c}
    if (!dense) pc.noalias() = U * U.middleRows(i0, cols).transpose();
    std::array<double, S> acc{};
    std::vector<double> w(static_cast<std::size_t>(n));
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Eigen::Index i = i0 + c;
      const double* col = dense ? dense->col(i).data() : pc.col(c).data();
      const double mii = 1.0 - lev[i];
      if (crossfit) {
        for (Eigen::Index j = 0; j < n; ++j) {
          const double p2 = col[j] * col[j];
          const double den = mii * (1.0 - lev[j]) + p2;
          if (den < 1e-14)
            throw NumericalError("cross-fit denominator vanishes at pair (" +
                                 std::to_string(i) + "," + std::to_string(j) + ")");
          w[static_cast<std::size_t>(j)] = p2 / den;
        }
      } else {
        for (Eigen::Index j = 0; j < n; ++j)
          w[static_cast<std::size_t>(j)] = col[j] * col[j];
      }
      w[static_cast<std::size_t>(i)] = 0.0;  // exclude own observation
      for (std::size_t s = 0; s < S; ++s) {
        const double* gs = g[s];
        const double* ws = w.data();
        double dot = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) dot += ws[j] * gs[j];
        acc[s] += f[s][i] * dot;
      }
    }
    partials[blk] = acc;
  });

  std::array<double, S> out{};
  for (const auto& p : partials)
    for (std::size_t s = 0; s < S; ++s) out[s] += p[s];
  return out;
}

}  // namespace manyiv::detail
