// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <Eigen/Dense>
#include <memory>

namespace btf {

// Symmetric positive-definite matrix with a cached lower Cholesky factor.
//
// Construction symmetrizes the input as (X + X^T)/2, which absorbs the
// floating-point drift of rank-one accumulations. Factorization retries once
// with +1e-8 * mean(diag) * I before throwing IndefiniteMatrixError carrying
// the failing pivot index.
//
// The factor cache is published atomically, so concurrent readers may share
// one instance; copies share the already-computed factor.
class SpdMatrix {
 public:
  explicit SpdMatrix(Eigen::MatrixXd m);
  static SpdMatrix identity(Eigen::Index dim);

  Eigen::Index dim() const { return m_.rows(); }
  const Eigen::MatrixXd& matrix() const { return m_; }

  // Lower-triangular factor L with L L^T = matrix(). Computed lazily, cached.
  const Eigen::MatrixXd& cholesky() const;

  // Solve matrix() * x = b through the Cholesky factor.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
  Eigen::MatrixXd inverse() const;

 private:
  Eigen::MatrixXd m_;
  mutable std::shared_ptr<const Eigen::MatrixXd> chol_;
};

}  // namespace btf
