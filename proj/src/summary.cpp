// Apache License, Version 2.0, refer to LICENSE.txt
#include "btf/summary.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace btf {

SummaryAccumulator::SummaryAccumulator(std::size_t cells, bool keep_samples)
    : cells_(cells), keep_(keep_samples), mean_(cells, 0.0), m2_(cells, 0.0) {}

void SummaryAccumulator::add(std::span<const double> field) {
  if (field.size() != cells_) {
    throw std::invalid_argument("SummaryAccumulator: field size mismatch");
  }
  ++n_;
  const double inv_n = 1.0 / n_;
  for (std::size_t c = 0; c < cells_; ++c) {
    const double delta = field[c] - mean_[c];
    mean_[c] += delta * inv_n;
    m2_[c] += delta * (field[c] - mean_[c]);
  }
  if (keep_) samples_.emplace_back(field.begin(), field.end());
}

std::vector<double> SummaryAccumulator::mean() const { return mean_; }

std::vector<double> SummaryAccumulator::stddev() const {
  std::vector<double> out(cells_, 0.0);
  if (n_ > 1) {
    for (std::size_t c = 0; c < cells_; ++c) out[c] = std::sqrt(m2_[c] / (n_ - 1));
  }
  return out;
}

std::vector<double> SummaryAccumulator::quantile(double p) const {
  if (!keep_) throw std::logic_error("SummaryAccumulator: samples were not retained");
  if (n_ == 0) throw std::logic_error("SummaryAccumulator: no samples");
  std::vector<double> out(cells_);
  std::vector<double> column(static_cast<std::size_t>(n_));
  const double pos = p * (n_ - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  for (std::size_t c = 0; c < cells_; ++c) {
    for (int s = 0; s < n_; ++s) column[static_cast<std::size_t>(s)] = samples_[s][c];
    std::sort(column.begin(), column.end());
    out[c] = column[lo] + frac * (column[hi] - column[lo]);
  }
  return out;
}

}  // namespace btf
