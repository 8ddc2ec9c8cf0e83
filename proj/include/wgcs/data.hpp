#ifndef WGCS_DATA_HPP
#define WGCS_DATA_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "json_util.hpp"

namespace wgcs {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// Paired sample {(x_i, y_i)}: X is n x d, Y is n x q.
struct PairedDataset {
  Matrix x;
  Matrix y;
  std::string provenance;

  Eigen::Index size() const { return x.rows(); }
  Eigen::Index x_dim() const { return x.cols(); }
  Eigen::Index y_dim() const { return y.cols(); }

  void validate() const {
    if (x.rows() != y.rows()) throw ContractError("X and Y row counts differ");
    if (!x.allFinite() || !y.allFinite()) throw ConfigError("dataset contains non-finite entries");
  }
};

/// Per-column location/scale, population SD (denominator n).
struct ColumnStats {
  RowVector mean;
  RowVector sd;

  Matrix apply(const Matrix& m) const {
    if (m.cols() != mean.size()) throw ContractError("standardization column count mismatch");
    return ((m.rowwise() - mean).array().rowwise() / sd.array()).matrix();
  }
  Matrix invert(const Matrix& m) const {
    if (m.cols() != mean.size()) throw ContractError("standardization column count mismatch");
    return ((m.array().rowwise() * sd.array()).rowwise() + mean.array()).matrix();
  }

  static ColumnStats identity(Eigen::Index cols) {
    return {RowVector::Zero(cols), RowVector::Ones(cols)};
  }
};

inline ColumnStats fit_column_stats(const Matrix& m, const std::string& prefix) {
  if (m.rows() == 0) throw ConfigError("cannot standardize an empty matrix");
  ColumnStats s;
  s.mean = m.colwise().mean();
  s.sd.resize(m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double var = (m.col(j).array() - s.mean(j)).square().mean();
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) throw ConfigError("column " + prefix + std::to_string(j + 1) + " has zero standard deviation");
    s.sd(j) = sd;
  }
  return s;
}

struct Standardization {
  ColumnStats x;
  ColumnStats y;
};

/// Centers and scales every column; returns the transformed data and the statistics used.
inline std::pair<PairedDataset, Standardization> standardize(const PairedDataset& data) {
  data.validate();
  Standardization st{fit_column_stats(data.x, "x_"), fit_column_stats(data.y, "y_")};
  PairedDataset out{st.x.apply(data.x), st.y.apply(data.y), data.provenance};
  return {std::move(out), std::move(st)};
}

inline PairedDataset destandardize(const PairedDataset& data, const Standardization& st) {
  return {st.x.invert(data.x), st.y.invert(data.y), data.provenance};
}

inline json stats_to_json(const ColumnStats& s) {
  json mean = json::array();
  json sd = json::array();
  for (Eigen::Index j = 0; j < s.mean.size(); ++j) {
    mean.push_back(s.mean(j));
    sd.push_back(s.sd(j));
  }
  return {{"mean", mean}, {"sd", sd}};
}

inline ColumnStats stats_from_json(const json& j) {
  try {
    const auto& mean = j.at("mean");
    const auto& sd = j.at("sd");
    if (mean.size() != sd.size()) throw LoadError("standardization: mean/sd length mismatch");
    ColumnStats s{RowVector(static_cast<Eigen::Index>(mean.size())), RowVector(static_cast<Eigen::Index>(sd.size()))};
    for (std::size_t i = 0; i < mean.size(); ++i) {
      s.mean(static_cast<Eigen::Index>(i)) = mean[i].get<double>();
      s.sd(static_cast<Eigen::Index>(i)) = sd[i].get<double>();
      if (!(s.sd(static_cast<Eigen::Index>(i)) > 0.0)) throw LoadError("standardization: non-positive sd");
    }
    return s;
  } catch (const json::exception& e) {
    throw LoadError(std::string("standardization: ") + e.what());
  }
}

inline json standardization_to_json(const Standardization& s) {
  return {{"x", stats_to_json(s.x)}, {"y", stats_to_json(s.y)}, {"sd_denominator", "n"}};
}

inline Standardization standardization_from_json(const json& j) {
  if (!j.contains("x") || !j.contains("y")) throw LoadError("standardization: missing x/y");
  return {stats_from_json(j.at("x")), stats_from_json(j.at("y"))};
}

// ---------------------------------------------------------------------------
// CSV

/// A parsed numeric CSV: header names and an n x k value matrix.
struct Table {
  std::vector<std::string> header;
  Matrix values;

  Eigen::Index column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<Eigen::Index>(i);
    throw ConfigError("CSV has no column '" + name + "'");
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

}  // namespace detail

inline Table parse_table(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  Table t;
  if (!std::getline(in, line)) throw ConfigError(origin + ": empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  for (auto& h : detail::split_csv_line(line)) t.header.push_back(detail::trim(h));
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != t.header.size())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " fields, found " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      const std::string v = detail::trim(c);
      // strtod rather than stod: subnormal values set ERANGE but parse exactly.
      char* end = nullptr;
      const double d = v.empty() ? 0.0 : std::strtod(v.c_str(), &end);
      const auto used = v.empty() ? 0 : static_cast<std::size_t>(end - v.c_str());
      if (used == 0 || used != v.size())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": non-numeric field '" + v + "'");
      row.push_back(d);
    }
    rows.push_back(std::move(row));
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return t;
}

inline Table read_table(const std::filesystem::path& path) { return parse_table(read_file(path), path.string()); }

inline std::string numbered_header(const std::string& prefix, Eigen::Index count) {
  std::string out;
  for (Eigen::Index i = 0; i < count; ++i) {
    if (i) out += ',';
    out += prefix + std::to_string(i + 1);
  }
  return out;
}

inline void append_row(std::string& out, const Eigen::Ref<const RowVector>& row) {
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (j) out += ',';
    out += format_double(row(j));
  }
}

/// Header x_1..x_d,y_1..y_q; LF line endings; 17 significant digits.
inline std::string dataset_to_csv(const PairedDataset& data) {
  std::string out = numbered_header("x_", data.x_dim());
  if (data.y_dim() > 0) out += (data.x_dim() > 0 ? "," : "") + numbered_header("y_", data.y_dim());
  out += '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    RowVector row(data.x_dim() + data.y_dim());
    row << data.x.row(i), data.y.row(i);
    append_row(out, row);
    out += '\n';
  }
  return out;
}

/// Splits a table on its x_* / y_* columns (in header order).
inline PairedDataset dataset_from_table(const Table& t, bool require_response = true) {
  std::vector<Eigen::Index> xs;
  std::vector<Eigen::Index> ys;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    const auto& h = t.header[i];
    if (h.rfind("x_", 0) == 0) {
      xs.push_back(static_cast<Eigen::Index>(i));
    } else if (h.rfind("y_", 0) == 0) {
      ys.push_back(static_cast<Eigen::Index>(i));
    } else {
      throw ConfigError("CSV column '" + h + "' is neither x_* nor y_*");
    }
  }
  if (xs.empty()) throw ConfigError("CSV has no x_* columns");
  if (require_response && ys.empty()) throw ConfigError("CSV has no y_* columns");
  PairedDataset d;
  d.x.resize(t.values.rows(), static_cast<Eigen::Index>(xs.size()));
  d.y.resize(t.values.rows(), static_cast<Eigen::Index>(ys.size()));
  for (std::size_t j = 0; j < xs.size(); ++j) d.x.col(static_cast<Eigen::Index>(j)) = t.values.col(xs[j]);
  for (std::size_t j = 0; j < ys.size(); ++j) d.y.col(static_cast<Eigen::Index>(j)) = t.values.col(ys[j]);
  d.provenance = "csv";
  d.validate();
  return d;
}

inline PairedDataset read_dataset_csv(const std::filesystem::path& path, bool require_response = true) {
  if (!std::filesystem::exists(path)) throw ConfigError("dataset not found: " + path.string());
  auto d = dataset_from_table(read_table(path), require_response);
  d.provenance = path.filename().string();
  return d;
}

/// Builds a dataset from an arbitrary numeric table: named response columns
/// become Y, the rest become X, and `one_hot` predictor columns are expanded
/// into one indicator per distinct value (ascending).
inline PairedDataset dataset_from_named_table(const Table& t, const std::vector<std::string>& response,
                                              const std::vector<std::string>& one_hot) {
  if (response.empty()) throw ConfigError("no response columns named");
  std::set<Eigen::Index> resp;
  for (const auto& r : response) resp.insert(t.column(r));
  std::set<Eigen::Index> cat;
  for (const auto& c : one_hot) {
    const Eigen::Index idx = t.column(c);
    if (resp.count(idx)) throw ConfigError("response column '" + c + "' cannot be one-hot encoded");
    cat.insert(idx);
  }
  std::vector<Eigen::VectorXd> xcols;
  for (Eigen::Index j = 0; j < t.values.cols(); ++j) {
    if (resp.count(j)) continue;
    if (cat.count(j)) {
      std::set<double> levels(t.values.col(j).data(), t.values.col(j).data() + t.values.rows());
      for (double lv : levels)
        xcols.push_back((t.values.col(j).array() == lv).cast<double>().matrix());
    } else {
      xcols.push_back(t.values.col(j));
    }
  }
  PairedDataset d;
  d.x.resize(t.values.rows(), static_cast<Eigen::Index>(xcols.size()));
  for (std::size_t j = 0; j < xcols.size(); ++j) d.x.col(static_cast<Eigen::Index>(j)) = xcols[j];
  d.y.resize(t.values.rows(), static_cast<Eigen::Index>(response.size()));
  for (std::size_t j = 0; j < response.size(); ++j) d.y.col(static_cast<Eigen::Index>(j)) = t.values.col(t.column(response[j]));
  d.provenance = "csv";
  d.validate();
  return d;
}

}  // namespace wgcs

#endif  // WGCS_DATA_HPP
