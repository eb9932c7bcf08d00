#include "manyiv/projection.hpp"

#include <cmath>
#include <string>

#include "manyiv/errors.hpp"

namespace manyiv {

ProjectionContext::ProjectionContext(Eigen::MatrixXd U, Eigen::Index block_size)
    : U_(std::move(U)), block_(block_size > 0 ? block_size : 256) {
  const Eigen::Index n = U_.rows(), K = U_.cols();
  if (n <= K || K < 1) throw DataError("projection basis needs n > K >= 1");
  // U must be orthonormal: everything downstream identifies P with U U^T.
  const Eigen::MatrixXd gram = U_.transpose() * U_;
  if ((gram - Eigen::MatrixXd::Identity(K, K)).cwiseAbs().maxCoeff() > 1e-10)
    throw NumericalError("projection basis not orthonormal");
  lev_ = U_.rowwise().squaredNorm();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lev_[i] >= 1.0 - 1e-12)
      throw NumericalError("leverage equals one, Assumption P_ii<1 violated (row " +
                           std::to_string(i) + ")");
  }
  const double lev_sum = lev_.sum();
  if (std::fabs(lev_sum - static_cast<double>(K)) > 1e-8 * static_cast<double>(K))
    throw NumericalError("trace of hat matrix differs from K");
}

double ProjectionContext::quad_form(const Eigen::VectorXd& a,
                                    const Eigen::VectorXd& b) const {
  if (a.size() != n() || b.size() != n())
    throw DataError("quad_form: vector length mismatch");
  const Eigen::VectorXd ua = U_.transpose() * a;
  const Eigen::VectorXd ub = U_.transpose() * b;
  const double diag = (lev_.array() * a.array() * b.array()).sum();
  return (ua.dot(ub) - diag) / std::sqrt(static_cast<double>(k()));
}

Eigen::VectorXd ProjectionContext::p_row(Eigen::Index i) const {
  if (i < 0 || i >= n()) throw DataError("p_row: index out of range");
  return U_ * U_.row(i).transpose();
}

Eigen::VectorXd ProjectionContext::m_row(Eigen::Index i) const {
  Eigen::VectorXd r = -p_row(i);
  r[i] += 1.0;
  return r;
}

Eigen::VectorXd ProjectionContext::apply_p(const Eigen::VectorXd& v) const {
  return U_ * (U_.transpose() * v);
}

const Eigen::MatrixXd* ProjectionContext::dense_p() const {
  if (n() > kDenseLimit) return nullptr;
  std::call_once(dense_once_, [this] {
    dense_ = std::make_unique<Eigen::MatrixXd>(U_ * U_.transpose());
  });
  return dense_.get();
}

ProjectionContext build_projection(const Eigen::MatrixXd& Z,
                                   Eigen::Index block_size) {
  const Eigen::Index n = Z.rows(), K = Z.cols();
  if (K < 1 || n <= K) throw DataError("build_projection: need n > K >= 1");
  if (!Z.allFinite()) throw DataError("build_projection: non-finite instruments");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
  // Rank by pivot magnitude relative to the largest pivot.
  const Eigen::VectorXd diag = qr.matrixR().diagonal().cwiseAbs();
  const double top = diag.size() ? diag.maxCoeff() : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index j = 0; j < K; ++j)
    if (diag[j] >= 1e-10 * top && top > 0.0) ++rank;
  if (rank < K) {
    // The trailing pivoted columns are the dependent ones.
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = rank; j < K; ++j) {
      if (!cols.empty()) cols += ", ";
      cols += std::to_string(perm[j]);
    }
    throw DataError("instrument matrix rank deficient; offending columns: " + cols);
  }
  Eigen::MatrixXd U = qr.householderQ() * Eigen::MatrixXd::Identity(n, K);
  return ProjectionContext(std::move(U), block_size);
}

}  // namespace manyiv
