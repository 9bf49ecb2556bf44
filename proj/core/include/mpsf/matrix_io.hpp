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

#ifndef MPSF_MATRIX_IO_HPP_
#define MPSF_MATRIX_IO_HPP_

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace mpsf {

/// Formats a double with 17 significant digits (lossless round trip).
std::string format_double(double v);

/// One CSV line from numeric fields, 17 significant digits each.
std::string csv_line(const std::vector<double>& fields);

/// Splits a CSV line; throws on empty fields.
std::vector<std::string> split_csv(const std::string& line);

/// Named matrix blocks, e.g. for terminal-ingredient bundles:
///   name,rows,cols
///   <rows lines of cols comma-separated values>
void write_matrix_block(std::ostream& os, const std::string& name,
                        const Eigen::MatrixXd& M);
/// Reads the next block; returns false at end of stream.
bool read_matrix_block(std::istream& is, std::string& name, Eigen::MatrixXd& M);

}  // namespace mpsf

#endif  // MPSF_MATRIX_IO_HPP_
