// Apache License, Version 2.0, refer to LICENSE.txt
#include "btf/distributions.hpp"

#include <stdexcept>
#include <string>

namespace btf {

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const SpdMatrix& scale,
                           MvnParam form, Rng& rng) {
  if (mean.size() != scale.dim()) {
    throw std::invalid_argument("sample_mvn: mean size does not match matrix dimension");
  }
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  const Eigen::MatrixXd& l = scale.cholesky();
  if (form == MvnParam::Covariance) {
    return mean + l * z;
  }
  return mean + l.transpose().triangularView<Eigen::Upper>().solve(z).eval();
}

SpdMatrix sample_wishart(const SpdMatrix& scale, double dof, Rng& rng) {
  const Eigen::Index p = scale.dim();
  if (dof < static_cast<double>(p)) {
    throw std::invalid_argument("sample_wishart: degrees of freedom " +
                                std::to_string(dof) + " below dimension " +
                                std::to_string(p));
  }
  // Bartlett: X = (L A)(L A)^T with A lower triangular, chi-squared diagonal.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(dof - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Eigen::MatrixXd la = scale.cholesky() * a;
  return SpdMatrix(la * la.transpose());
}

SpdMatrix sample_inv_wishart(const SpdMatrix& scale, double dof, Rng& rng) {
  if (dof < static_cast<double>(scale.dim())) {
    throw std::invalid_argument("sample_inv_wishart: degrees of freedom " +
                                std::to_string(dof) + " below dimension " +
                                std::to_string(scale.dim()));
  }
  const SpdMatrix w = sample_wishart(SpdMatrix(scale.inverse()), dof, rng);
  return SpdMatrix(w.inverse());
}

Eigen::MatrixXd sample_matrix_normal(const Eigen::MatrixXd& mean,
                                     const SpdMatrix& row_cov,
                                     const SpdMatrix& col_cov, Rng& rng) {
  if (mean.rows() != row_cov.dim() || mean.cols() != col_cov.dim()) {
    throw std::invalid_argument("sample_matrix_normal: shape mismatch between mean and covariances");
  }
  Eigen::MatrixXd z(mean.rows(), mean.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = rng.normal();
  }
  return mean + row_cov.cholesky() * z * col_cov.cholesky().transpose();
}

double sample_gamma(double shape, double rate, Rng& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::invalid_argument("sample_gamma: shape and rate must be positive");
  }
  return rng.gamma(shape, rate);
}

}  // namespace btf
