#include "manyiv/dataset.hpp"

#include <cmath>

#include "manyiv/csv.hpp"
#include "manyiv/errors.hpp"

namespace manyiv {

void IVDataset::validate() const {
  const Eigen::Index nn = n();
  if (x.size() != nn || Z.rows() != nn)
    throw DataError("dataset columns have mismatched lengths");
  if (Z.cols() < 1) throw DataError("at least one instrument required");
  if (nn <= Z.cols()) throw DataError("need n > K");
  if (!y.allFinite() || !x.allFinite() || !Z.allFinite())
    throw DataError("non-finite entries in dataset");
  if (W) {
    if (W->rows() != nn) throw DataError("control matrix has wrong row count");
    if (!W->allFinite()) throw DataError("non-finite entries in controls");
    if (nn <= Z.cols() + W->cols()) throw DataError("need n > K + d");
  }
}

IVDataset load_dataset_csv(const std::string& path) {
  return dataset_from_table(load_csv(path));
}

IVDataset dataset_from_table(const CsvTable& t) {
  const int yc = t.require_col("y");
  const int xc = t.require_col("x");
  std::vector<int> zc, wc;
  for (int k = 1;; ++k) {
    const int c = t.col("z" + std::to_string(k));
    if (c < 0) break;
    zc.push_back(c);
  }
  for (int k = 1;; ++k) {
    const int c = t.col("w" + std::to_string(k));
    if (c < 0) break;
    wc.push_back(c);
  }
  if (zc.empty()) throw DataError("missing column 'z1'");
  const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
  IVDataset d;
  d.y.resize(n);
  d.x.resize(n);
  d.Z.resize(n, static_cast<Eigen::Index>(zc.size()));
  if (!wc.empty()) d.W.emplace(n, static_cast<Eigen::Index>(wc.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    d.y[i] = row[static_cast<std::size_t>(yc)];
    d.x[i] = row[static_cast<std::size_t>(xc)];
    for (std::size_t k = 0; k < zc.size(); ++k)
      d.Z(i, static_cast<Eigen::Index>(k)) = row[static_cast<std::size_t>(zc[k])];
    for (std::size_t k = 0; k < wc.size(); ++k)
      (*d.W)(i, static_cast<Eigen::Index>(k)) = row[static_cast<std::size_t>(wc[k])];
  }
  d.validate();
  return d;
}

IVDataset partial_out(const IVDataset& data) {
  if (!data.W) return data;
  data.validate();
  const Eigen::MatrixXd& W = *data.W;
  const Eigen::Index n = data.n();
  const Eigen::Index d = W.cols();
  if (n <= d) throw DataError("need n > d to partial out controls");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(W);
  qr.setThreshold(1e-10);
  if (qr.rank() < d) throw DataError("controls collinear");

  auto residualize = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return v - W * qr.solve(v);
  };

  IVDataset out;
  out.y = residualize(data.y);
  out.x = residualize(data.x);

  const double drop_tol = 1e-10 * std::sqrt(static_cast<double>(n));
  std::vector<Eigen::Index> keep;
  Eigen::MatrixXd Zr(n, data.Z.cols());
  for (Eigen::Index k = 0; k < data.Z.cols(); ++k) {
    Zr.col(k) = residualize(data.Z.col(k));
    if (Zr.col(k).norm() >= drop_tol) keep.push_back(k);
  }
  if (keep.empty()) throw DataError("all instruments collinear with controls");
  out.Z.resize(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) out.Z.col(static_cast<Eigen::Index>(k)) = Zr.col(keep[k]);
  out.validate();
  return out;
}

}  // namespace manyiv
