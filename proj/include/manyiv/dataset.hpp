#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

namespace manyiv {

// One cross-section: outcome y, scalar endogenous regressor x, instruments Z
// and (optionally) exogenous controls W to be partialled out.
struct IVDataset {
  Eigen::VectorXd y;
  Eigen::VectorXd x;
  Eigen::MatrixXd Z;
  std::optional<Eigen::MatrixXd> W;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index num_instruments() const { return Z.cols(); }
  Eigen::Index num_controls() const { return W ? W->cols() : 0; }

  // Enforces: finite entries, n > K >= 1, and n > K + d with full-rank W
  // when controls are present.
  void validate() const;
};

// CSV schema: header row with y, x, z1..zK and optional w1..wd.
IVDataset load_dataset_csv(const std::string& path);

struct CsvTable;  // see csv.hpp
IVDataset dataset_from_table(const CsvTable& table);

// Residualizes y, x and every instrument column on W, drops instrument
// columns that become numerically zero (norm < 1e-10 * sqrt(n)), and returns
// a dataset without controls. A dataset without W is returned unchanged.
IVDataset partial_out(const IVDataset& data);

}  // namespace manyiv
