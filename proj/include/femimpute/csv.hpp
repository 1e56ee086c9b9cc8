// CSV ingestion and emission.  Comma separated, optional header row; a
// missing cell is an empty field or the literal NaN (case-insensitive).
// Numbers are written in shortest round-trip form so reruns are
// byte-identical.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "femimpute/masked_data.hpp"

namespace femimpute {

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

MaskedDataset read_masked_csv(const std::string& path);

// Complete matrix reader; missing cells are rejected with the row index.
Eigen::MatrixXd read_complete_csv(const std::string& path,
                                  std::vector<std::string>* names = nullptr);

// Complete matrix; header emitted when names is nonempty.
void write_csv(const std::string& path, const Eigen::MatrixXd& values,
               const std::vector<std::string>& names = {});

// Masked matrix; missing cells become empty fields.
void write_masked_csv(const std::string& path, const MaskedDataset& data);

// Single integer column with a header.
void write_int_csv(const std::string& path, const std::string& name,
                   const std::vector<int>& values);

// 0/1 matrix, 1 = masked (missing).
void write_mask_csv(const std::string& path, const BoolArray& observed);

}  // namespace femimpute
