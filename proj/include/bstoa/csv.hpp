// SPDX-License-Identifier: Apache-2.0
//
// Plain numeric CSV: one matrix row per line, no header.

#pragma once

#include "bstoa/channel.hpp"
#include "bstoa/common.hpp"

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace bstoa {

inline Matrix parse_csv_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::vector<double> row;
    for (const auto& cell : detail::split(detail::trim(line), ',')) {
      row.push_back(detail::parse_double(cell, "csv line " + std::to_string(line_no)));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorKind::ParseError, "csv line " + std::to_string(line_no) +
                                             " has a different column count");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::ParseError, "csv input is empty");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

/// %.17g per cell, so values round-trip exactly.
template <typename Derived>
std::string format_csv_matrix(const Eigen::MatrixBase<Derived>& m) {
  std::ostringstream out;
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      if constexpr (std::is_integral_v<typename Derived::Scalar>) {
        out << static_cast<long long>(m(i, j));
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(m(i, j)));
        out << buf;
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace bstoa
