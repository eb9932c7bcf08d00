#pragma once

#include <string>
#include <vector>

namespace manyiv {

// Numeric CSV with a header row. Empty fields, NA/NaN and non-numeric cells
// are rejected so missing data never enters an estimator silently.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int col(const std::string& name) const;       // -1 when absent
  int require_col(const std::string& name) const;
  std::vector<double> column(int idx) const;
};

CsvTable load_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& origin = "<string>");

// Shortest round-trip decimal form; keeps emitted CSV/JSON byte-stable.
std::string format_double(double v);

}  // namespace manyiv
