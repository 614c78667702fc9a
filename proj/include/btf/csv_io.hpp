// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "btf/series.hpp"

namespace btf {

// Formats:
//   matrix-csv      N rows x T comma-separated columns; empty or nan = missing;
//                   an optional header row is auto-detected (non-numeric first row).
//   tensor-long-csv header "i,j,t,value", 0-based integer indices, one observed
//                   cell per row.
//   mask files      matrix-csv of 0/1.
//   index files     header "i,t" (matrix) or "i,j,t" (tensor).

SeriesMatrix load_series_matrix(const std::string& path, int period = 1);
void save_series_matrix(const std::string& path, const SeriesMatrix& series);

struct TensorDims {
  int m = 0, n = 0, t = 0;
};

// When dims is absent they are inferred as max index + 1 per axis.
SeriesTensor load_series_tensor(const std::string& path,
                                std::optional<TensorDims> dims = std::nullopt,
                                int period = 1);
void save_series_tensor(const std::string& path, const SeriesTensor& series);

BoolGrid load_mask_matrix(const std::string& path);
void save_mask_matrix(const std::string& path, const BoolGrid& mask);

std::vector<MatrixCell> load_matrix_index(const std::string& path);
void save_matrix_index(const std::string& path, const std::vector<MatrixCell>& cells);
std::vector<TensorCell> load_tensor_index(const std::string& path);
void save_tensor_index(const std::string& path, const std::vector<TensorCell>& cells);

// Fully dense matrix CSV (no missing cells), used for estimate outputs.
Eigen::MatrixXd load_dense_matrix(const std::string& path);
void save_dense_matrix(const std::string& path, const Eigen::MatrixXd& m);

}  // namespace btf
