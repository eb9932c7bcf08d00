#include "manyiv/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "manyiv/errors.hpp"

namespace manyiv {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

int CsvTable::col(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int CsvTable::require_col(const std::string& name) const {
  const int idx = col(name);
  if (idx < 0) throw DataError("missing column '" + name + "'");
  return idx;
}

std::vector<double> CsvTable::column(int idx) const {
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto& r : rows) v.push_back(r[static_cast<std::size_t>(idx)]);
  return v;
}

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  CsvTable t;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (t.header.empty()) {
      t.header = fields;
      continue;
    }
    if (fields.size() != t.header.size())
      throw DataError(origin + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::string& f = fields[i];
      double val = 0.0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), val);
      if (f.empty() || ec != std::errc() || p != f.data() + f.size() ||
          !std::isfinite(val))
        throw DataError(origin + ":" + std::to_string(lineno) +
                        ": missing or non-numeric value in column '" +
                        t.header[i] + "'");
      row[i] = val;
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw DataError(origin + ": empty CSV");
  return t;
}

CsvTable load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path);
}

std::string format_double(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

}  // namespace manyiv
