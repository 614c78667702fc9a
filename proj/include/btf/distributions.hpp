// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <Eigen/Dense>

#include "btf/rng.hpp"
#include "btf/spd_matrix.hpp"

namespace btf {

enum class MvnParam { Covariance, Precision };

// One draw from N(mean, scale) or, in precision form, N(mean, scale^{-1}).
// The precision form back-solves two triangular systems against the Cholesky
// factor instead of inverting the precision matrix.
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const SpdMatrix& scale,
                           MvnParam form, Rng& rng);

// Wishart draw with E[X] = dof * scale, built from the Bartlett
// decomposition. Requires dof >= dim.
SpdMatrix sample_wishart(const SpdMatrix& scale, double dof, Rng& rng);

// Draw X such that X^{-1} ~ Wishart(scale^{-1}, dof).
SpdMatrix sample_inv_wishart(const SpdMatrix& scale, double dof, Rng& rng);

// Matrix-normal draw: vec(X) ~ N(vec(mean), col_cov (x) row_cov), realized as
// mean + L_row Z L_col^T with Z standard normal.
Eigen::MatrixXd sample_matrix_normal(const Eigen::MatrixXd& mean,
                                     const SpdMatrix& row_cov,
                                     const SpdMatrix& col_cov, Rng& rng);

double sample_gamma(double shape, double rate, Rng& rng);

}  // namespace btf
