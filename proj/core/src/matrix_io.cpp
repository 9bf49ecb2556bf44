/*
 Copyright 2026 The mpsf Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "mpsf/matrix_io.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mpsf {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

std::string csv_line(const std::vector<double>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out.push_back(',');
    out += format_double(fields[i]);
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  for (const auto& f : fields) {
    if (f.empty()) throw std::runtime_error("empty CSV field in line: " + line);
  }
  return fields;
}

void write_matrix_block(std::ostream& os, const std::string& name,
                        const Eigen::MatrixXd& M) {
  os << name << ',' << M.rows() << ',' << M.cols() << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j > 0) os << ',';
      os << format_double(M(i, j));
    }
    os << '\n';
  }
}

bool read_matrix_block(std::istream& is, std::string& name, Eigen::MatrixXd& M) {
  std::string header;
  do {
    if (!std::getline(is, header)) return false;
  } while (header.empty() || header[0] == '#');

  const auto fields = split_csv(header);
  if (fields.size() != 3) {
    throw std::runtime_error("bad matrix block header: " + header);
  }
  name = fields[0];
  const Eigen::Index rows = std::stol(fields[1]);
  const Eigen::Index cols = std::stol(fields[2]);
  if (rows < 1 || cols < 1) {
    throw std::runtime_error("bad matrix block dimensions: " + header);
  }
  M.resize(rows, cols);
  std::string line;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(is, line)) {
      throw std::runtime_error("truncated matrix block: " + name);
    }
    const auto row = split_csv(line);
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw std::runtime_error("bad matrix row width in block: " + name);
    }
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = std::stod(row[j]);
  }
  return true;
}

}  // namespace mpsf
