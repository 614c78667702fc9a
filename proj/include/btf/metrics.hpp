// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <span>
#include <vector>

#include "btf/series.hpp"

namespace btf {

struct MapeResult {
  double value = 0.0;             // percentage
  std::size_t used = 0;           // entries entering the sum
  std::size_t excluded_zeros = 0; // entries dropped because actual == 0
};

// Mean absolute percentage error, (1/n) sum |y - yhat| / y * 100. Entries
// with actual exactly zero are excluded and counted. Throws
// UndefinedMetricError when nothing remains.
MapeResult mape(std::span<const double> actual, std::span<const double> estimate);

double rmse(std::span<const double> actual, std::span<const double> estimate);

std::vector<double> gather(const Eigen::MatrixXd& m, const std::vector<MatrixCell>& cells);
std::vector<double> gather(const Grid3<double>& g, const std::vector<TensorCell>& cells);

}  // namespace btf
