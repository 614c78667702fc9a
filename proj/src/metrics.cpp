// Apache License, Version 2.0, refer to LICENSE.txt
#include "btf/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "btf/errors.hpp"

namespace btf {

MapeResult mape(std::span<const double> actual, std::span<const double> estimate) {
  if (actual.size() != estimate.size()) {
    throw std::invalid_argument("mape: length mismatch");
  }
  MapeResult res;
  double sum = 0.0;
  for (std::size_t k = 0; k < actual.size(); ++k) {
    if (actual[k] == 0.0) {
      ++res.excluded_zeros;
      continue;
    }
    sum += std::abs(actual[k] - estimate[k]) / std::abs(actual[k]);
    ++res.used;
  }
  if (res.used == 0) {
    throw UndefinedMetricError("mape: no entries with nonzero actual value");
  }
  res.value = sum / static_cast<double>(res.used) * 100.0;
  return res;
}

double rmse(std::span<const double> actual, std::span<const double> estimate) {
  if (actual.size() != estimate.size()) {
    throw std::invalid_argument("rmse: length mismatch");
  }
  if (actual.empty()) {
    throw UndefinedMetricError("rmse: empty input");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < actual.size(); ++k) {
    const double d = actual[k] - estimate[k];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

std::vector<double> gather(const Eigen::MatrixXd& m, const std::vector<MatrixCell>& cells) {
  std::vector<double> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(m(c.i, c.t));
  return out;
}

std::vector<double> gather(const Grid3<double>& g, const std::vector<TensorCell>& cells) {
  std::vector<double> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(g(c.i, c.j, c.t));
  return out;
}

}  // namespace btf
