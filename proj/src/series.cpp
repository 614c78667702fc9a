// Apache License, Version 2.0, refer to LICENSE.txt
#include "btf/series.hpp"

#include <cmath>
#include <stdexcept>

namespace btf {

SeriesMatrix SeriesMatrix::from_dense(Eigen::MatrixXd values, int period) {
  SeriesMatrix out;
  out.mask = values.array().unaryExpr([](double v) { return std::isfinite(v); });
  out.values = std::move(values);
  out.period = period;
  for (int i = 0; i < out.n_series(); ++i) {
    for (int t = 0; t < out.n_steps(); ++t) {
      if (!out.mask(i, t)) out.values(i, t) = std::numeric_limits<double>::quiet_NaN();
    }
  }
  out.validate();
  return out;
}

SeriesMatrix SeriesMatrix::slice_steps(int begin, int end) const {
  if (begin < 0 || end > n_steps() || begin >= end) {
    throw std::invalid_argument("SeriesMatrix::slice_steps: bad range");
  }
  SeriesMatrix out;
  out.values = values.middleCols(begin, end - begin);
  out.mask = mask.middleCols(begin, end - begin);
  out.period = period;
  return out;
}

void SeriesMatrix::validate() const {
  if (values.rows() < 1 || values.cols() < 1) {
    throw std::invalid_argument("SeriesMatrix: needs at least one series and one step");
  }
  if (values.rows() != mask.rows() || values.cols() != mask.cols()) {
    throw std::invalid_argument("SeriesMatrix: value/mask shape mismatch");
  }
  if (period < 1 || period > n_steps()) {
    throw std::invalid_argument("SeriesMatrix: period must lie in [1, n_steps]");
  }
}

std::int64_t SeriesTensor::observed_count() const {
  std::int64_t n = 0;
  for (std::uint8_t m : mask.flat()) n += m != 0;
  return n;
}

SeriesTensor SeriesTensor::from_dense(Grid3<double> values, int period) {
  SeriesTensor out;
  out.mask = Grid3<std::uint8_t>(values.dim0(), values.dim1(), values.dim2(), 0);
  for (std::size_t c = 0; c < values.size(); ++c) {
    const bool obs = std::isfinite(values.flat()[c]);
    out.mask.flat()[c] = obs ? 1 : 0;
    if (!obs) values.flat()[c] = std::numeric_limits<double>::quiet_NaN();
  }
  out.values = std::move(values);
  out.period = period;
  out.validate();
  return out;
}

SeriesTensor SeriesTensor::slice_steps(int begin, int end) const {
  if (begin < 0 || end > n_steps() || begin >= end) {
    throw std::invalid_argument("SeriesTensor::slice_steps: bad range");
  }
  SeriesTensor out;
  out.values = Grid3<double>(dim0(), dim1(), end - begin);
  out.mask = Grid3<std::uint8_t>(dim0(), dim1(), end - begin, 0);
  for (int i = 0; i < dim0(); ++i) {
    for (int j = 0; j < dim1(); ++j) {
      for (int t = begin; t < end; ++t) {
        out.values(i, j, t - begin) = values(i, j, t);
        out.mask(i, j, t - begin) = mask(i, j, t);
      }
    }
  }
  out.period = period;
  return out;
}

void SeriesTensor::validate() const {
  if (values.dim0() < 1 || values.dim1() < 1 || values.dim2() < 1) {
    throw std::invalid_argument("SeriesTensor: all dimensions must be positive");
  }
  if (values.dim0() != mask.dim0() || values.dim1() != mask.dim1() ||
      values.dim2() != mask.dim2()) {
    throw std::invalid_argument("SeriesTensor: value/mask shape mismatch");
  }
  if (period < 1 || period > n_steps()) {
    throw std::invalid_argument("SeriesTensor: period must lie in [1, n_steps]");
  }
}

}  // namespace btf
