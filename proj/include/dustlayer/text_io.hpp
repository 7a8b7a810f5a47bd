// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dustlayer/boundary_layer.hpp"
#include "dustlayer/errors.hpp"
#include "dustlayer/spectrum.hpp"

namespace dustlayer::io {

/// Shortest round-trip decimal representation; locale-free and bitwise
/// reproducible, which the emitted numeric files rely on.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xf];
    h >>= 4;
  }
  return std::string(buf, 16);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write file: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw ConfigError("write failed: " + path.string());
}

/// Whitespace-separated numeric rows; '#' starts a comment line. All rows
/// must have the same number of columns.
inline std::vector<std::vector<double>> read_numeric_rows(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open numeric file: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof() && ls.fail())
      throw ConfigError("malformed numeric row in " + path.string() + ": " + line);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("no numeric rows in " + path.string());
  for (const auto& r : rows)
    if (r.size() != rows[0].size())
      throw ConfigError("ragged rows in " + path.string());
  return rows;
}

/// Square matrix from whitespace-separated rows.
inline Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  const auto rows = read_numeric_rows(path);
  const auto n = rows.size();
  if (rows[0].size() != n)
    throw ConfigError("matrix file is not square: " + path.string());
  Eigen::MatrixXd m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = rows[i][j];
  return m;
}

/// Column-oriented coefficient table: first column is the node coordinate,
/// remaining columns are values.
struct CoefficientTable {
  std::vector<double> nodes;
  std::vector<std::vector<double>> columns;  // columns[c][row]
};

inline CoefficientTable read_coefficient_table(const std::filesystem::path& path) {
  const auto rows = read_numeric_rows(path);
  if (rows[0].size() < 2)
    throw ConfigError("coefficient file needs node/value columns: " + path.string());
  CoefficientTable t;
  t.columns.resize(rows[0].size() - 1);
  for (const auto& r : rows) {
    t.nodes.push_back(r[0]);
    for (std::size_t c = 1; c < r.size(); ++c) t.columns[c - 1].push_back(r[c]);
  }
  return t;
}

/// One eigenvalue record per line: index, Re lambda, Im lambda, gap flag.
inline std::string spectrum_report(const Spectrum& sp, double gap_min) {
  std::string out;
  out += "# spectrum report\n";
  out += "# index re_lambda im_lambda gap_ok\n";
  for (std::size_t i = 0; i < sp.eigenvalues.size(); ++i) {
    const bool ok = i == 0 || sp.eigenvalues[i].real() <= -gap_min;
    out += std::to_string(i) + " " + format_double(sp.eigenvalues[i].real()) + " " +
           format_double(sp.eigenvalues[i].imag()) + " " + (ok ? "yes" : "no") + "\n";
  }
  out += "spectral_gap " + format_double(sp.spectral_gap) + "\n";
  out += "condition1: satisfied\n";
  return out;
}

inline std::string condition2_report(const Condition2Report& rep,
                                     const std::string& policy) {
  std::string out;
  out += "# condition 2 report\n";
  out += "policy " + policy + "\n";
  out += "max_residual " + format_double(rep.max_residual) + "\n";
  out += "relative_residual " + format_double(rep.relative) + "\n";
  out += "location x_index " + std::to_string(rep.x_index) + " p_index " +
         std::to_string(rep.p_index) + "\n";
  out += "tolerance " + format_double(rep.tol) + "\n";
  out += std::string("condition2: ") + (rep.satisfied ? "satisfied" : "violated") + "\n";
  return out;
}

/// Minimal deterministic CSV sink: fixed column order, '\n' line ends.
class CsvWriter {
public:
  explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) body_ += ',';
      body_ += columns_[i];
    }
    body_ += '\n';
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size())
      throw NumericalError("CsvWriter: column count mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) body_ += ',';
      body_ += cells[i];
    }
    body_ += '\n';
  }

  const std::string& str() const { return body_; }

private:
  std::vector<std::string> columns_;
  std::string body_;
};

}  // namespace dustlayer::io
