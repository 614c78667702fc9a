// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

namespace btf {

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct MatrixCell {
  int i = 0;
  int t = 0;
  friend bool operator==(const MatrixCell&, const MatrixCell&) = default;
};

struct TensorCell {
  int i = 0;
  int j = 0;
  int t = 0;
  friend bool operator==(const TensorCell&, const TensorCell&) = default;
};

// Multivariate time series over N locations and T steps. Cells with
// mask=false hold NaN and are never read as data. period is the number of
// time slots per day (T0).
struct SeriesMatrix {
  Eigen::MatrixXd values;
  BoolGrid mask;
  int period = 1;

  int n_series() const { return static_cast<int>(values.rows()); }
  int n_steps() const { return static_cast<int>(values.cols()); }
  bool observed(int i, int t) const { return mask(i, t); }
  std::int64_t observed_count() const { return mask.count(); }

  void clear_cell(int i, int t) {
    mask(i, t) = false;
    values(i, t) = std::numeric_limits<double>::quiet_NaN();
  }

  // NaN entries become missing cells.
  static SeriesMatrix from_dense(Eigen::MatrixXd values, int period = 1);

  // Columns [begin, end); period carries over.
  SeriesMatrix slice_steps(int begin, int end) const;

  void validate() const;
};

// Dense third-order grid, index order (i, j, t) with t fastest.
template <class T>
class Grid3 {
 public:
  Grid3() = default;
  Grid3(int d0, int d1, int d2, T fill = T())
      : d0_(d0), d1_(d1), d2_(d2),
        data_(static_cast<std::size_t>(d0) * d1 * d2, fill) {}

  int dim0() const { return d0_; }
  int dim1() const { return d1_; }
  int dim2() const { return d2_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int i, int j, int t) { return data_[index(i, j, t)]; }
  const T& operator()(int i, int j, int t) const { return data_[index(i, j, t)]; }

  const std::vector<T>& flat() const { return data_; }
  std::vector<T>& flat() { return data_; }

  std::size_t index(int i, int j, int t) const {
    return (static_cast<std::size_t>(i) * d1_ + j) * d2_ + t;
  }

 private:
  int d0_ = 0, d1_ = 0, d2_ = 0;
  std::vector<T> data_;
};

// Third-order series tensor (M x N x T) with an observation mask.
struct SeriesTensor {
  Grid3<double> values;
  Grid3<std::uint8_t> mask;
  int period = 1;

  int dim0() const { return values.dim0(); }
  int dim1() const { return values.dim1(); }
  int n_steps() const { return values.dim2(); }
  bool observed(int i, int j, int t) const { return mask(i, j, t) != 0; }
  std::int64_t observed_count() const;

  void clear_cell(int i, int j, int t) {
    mask(i, j, t) = 0;
    values(i, j, t) = std::numeric_limits<double>::quiet_NaN();
  }

  static SeriesTensor from_dense(Grid3<double> values, int period = 1);

  SeriesTensor slice_steps(int begin, int end) const;

  void validate() const;
};

}  // namespace btf
