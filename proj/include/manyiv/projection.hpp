#pragma once

#include <Eigen/Dense>
#include <memory>
#include <mutex>

namespace manyiv {

// Hat-matrix algebra behind an orthonormal factor U with P = U * U^T.
// Immutable after construction; safe to share across concurrent readers.
// Pairwise O(n^2) sums stream over row blocks of U so memory stays at
// O(block_size * n); a dense copy of P is materialized lazily only when
// n <= kDenseLimit.
class ProjectionContext {
 public:
  static constexpr Eigen::Index kDenseLimit = 2000;

  ProjectionContext(Eigen::MatrixXd U, Eigen::Index block_size);

  Eigen::Index n() const { return U_.rows(); }
  Eigen::Index k() const { return U_.cols(); }
  Eigen::Index block_size() const { return block_; }
  const Eigen::MatrixXd& basis() const { return U_; }
  const Eigen::VectorXd& leverages() const { return lev_; }

  // Q_{a,b} = sum_{i != j} a_i P_ij b_j / sqrt(K), computed in O(nK).
  double quad_form(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

  Eigen::VectorXd p_row(Eigen::Index i) const;      // (P_i1, ..., P_in)
  Eigen::VectorXd m_row(Eigen::Index i) const;      // e_i - p_row(i)
  Eigen::VectorXd apply_p(const Eigen::VectorXd& v) const;  // P * v

  // nullptr when n > kDenseLimit.
  const Eigen::MatrixXd* dense_p() const;

 private:
  Eigen::MatrixXd U_;
  Eigen::VectorXd lev_;
  Eigen::Index block_;
  mutable std::unique_ptr<Eigen::MatrixXd> dense_;
  mutable std::once_flag dense_once_;
};

// Orthonormalizes Z by column-pivoted QR. Errors when Z is rank deficient
// (listing the offending columns) or when some leverage reaches one.
ProjectionContext build_projection(const Eigen::MatrixXd& Z,
                                   Eigen::Index block_size = 256);

}  // namespace manyiv
