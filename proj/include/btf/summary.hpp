// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "btf/series.hpp"

namespace btf {

// Streams per-cell mean/variance over retained draws (Welford) and, when
// keep_samples is set, stores the raw draws for order-statistic quantiles.
class SummaryAccumulator {
 public:
  SummaryAccumulator(std::size_t cells, bool keep_samples);

  void add(std::span<const double> field);
  int count() const { return n_; }
  bool keeps_samples() const { return keep_; }

  std::vector<double> mean() const;
  std::vector<double> stddev() const;  // sample standard deviation
  // Linear interpolation between order statistics; requires keep_samples.
  std::vector<double> quantile(double p) const;

 private:
  std::size_t cells_;
  bool keep_;
  int n_ = 0;
  std::vector<double> mean_, m2_;
  std::vector<std::vector<double>> samples_;
};

// Cellwise posterior summary over the retained Gibbs draws. The quantile
// grids are empty when per-sample storage was disabled.
struct PosteriorSummary {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd stddev;
  Eigen::MatrixXd q05;
  Eigen::MatrixXd q95;
  int sample_count = 0;
  std::vector<int> empty_series;  // rows that had no observation at all
};

struct TensorPosteriorSummary {
  Grid3<double> mean;
  Grid3<double> stddev;
  Grid3<double> q05;
  Grid3<double> q95;
  int sample_count = 0;
  std::vector<MatrixCell> empty_fibers;  // (i, j) pairs with no observation
};

}  // namespace btf
