// Apache License, Version 2.0, refer to LICENSE.txt
#include "btf/spd_matrix.hpp"

#include <atomic>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "btf/errors.hpp"

namespace btf {

namespace {

// In-place lower Cholesky; returns the first failing pivot index or -1.
int cholesky_lower(Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return static_cast<int>(j);
    const double pivot = std::sqrt(d);
    a(j, j) = pivot;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / pivot;
    }
  }
  a.triangularView<Eigen::StrictlyUpper>().setZero();
  return -1;
}

}  // namespace

SpdMatrix::SpdMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() == 0 || m_.rows() != m_.cols()) {
    throw std::invalid_argument("SpdMatrix: matrix must be square and non-empty");
  }
  m_ = 0.5 * (m_ + m_.transpose()).eval();
}

SpdMatrix SpdMatrix::identity(Eigen::Index dim) {
  return SpdMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

const Eigen::MatrixXd& SpdMatrix::cholesky() const {
  if (auto cached = std::atomic_load_explicit(&chol_, std::memory_order_acquire)) {
    return *cached;
  }
  Eigen::MatrixXd work = m_;
  int pivot = cholesky_lower(work);
  if (pivot >= 0) {
    const double jitter = 1e-8 * m_.diagonal().mean();
    work = m_;
    work.diagonal().array() += jitter;
    pivot = cholesky_lower(work);
    if (pivot >= 0) {
      throw IndefiniteMatrixError(
          pivot, "matrix is not positive definite (pivot " +
                     std::to_string(pivot) + " of " +
                     std::to_string(m_.rows()) + " non-positive after jitter)");
    }
  }
  auto computed = std::make_shared<const Eigen::MatrixXd>(std::move(work));
  std::shared_ptr<const Eigen::MatrixXd> expected;
  if (!std::atomic_compare_exchange_strong(&chol_, &expected, computed)) {
    return *expected;  // another thread published first; keep its factor
  }
  return *computed;
}

Eigen::VectorXd SpdMatrix::solve(const Eigen::VectorXd& b) const {
  const Eigen::MatrixXd& l = cholesky();
  Eigen::VectorXd y = l.triangularView<Eigen::Lower>().solve(b);
  return l.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd SpdMatrix::solve(const Eigen::MatrixXd& b) const {
  const Eigen::MatrixXd& l = cholesky();
  Eigen::MatrixXd y = l.triangularView<Eigen::Lower>().solve(b);
  return l.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd SpdMatrix::inverse() const {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim(), dim());
  return solve(eye);
}

}  // namespace btf
