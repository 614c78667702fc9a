// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <Eigen/Dense>
#include <vector>

namespace btf {

// Ordered positive lags h_1 < ... < h_d defining the autoregressive memory.
class LagSet {
 public:
  explicit LagSet(std::vector<int> lags);

  int order() const { return static_cast<int>(lags_.size()); }  // d
  int max_lag() const { return lags_.back(); }                  // h_d
  int lag(int k) const { return lags_[k]; }
  const std::vector<int>& lags() const { return lags_; }

 private:
  std::vector<int> lags_;
};

// Fixed prior constants. nu0 parameterizes the Wishart prior on factor
// precisions and nu0_iw the inverse-Wishart prior on the innovation
// covariance; both default to the rank.
struct HyperPriors {
  double beta0 = 1.0;
  double nu0 = 0.0;
  double nu0_iw = 0.0;
  Eigen::VectorXd mu0;    // R
  Eigen::MatrixXd w0;     // R x R
  Eigen::MatrixXd s0;     // R x R
  Eigen::MatrixXd psi0;   // Rd x Rd
  Eigen::MatrixXd m0;     // Rd x R
  double gamma_shape = 1e-6;
  double gamma_rate = 1e-6;

  static HyperPriors defaults(int rank, int order);
  void validate(int rank, int order) const;
};

// Per-series noise keeps one precision per row; isotropic pools a single one.
enum class NoiseMode { PerSeries, Isotropic };

// FullVar samples dense coefficient matrices; DiagonalAr restricts them to
// diagonals (independent per-factor autoregressions); FixedIdentity pins the
// single lag-1 coefficient matrix to the identity (random-walk factors).
enum class DynamicsMode { FullVar, DiagonalAr, FixedIdentity };

struct ModelConfig {
  int rank = 10;
  LagSet lags{{1}};
  NoiseMode noise = NoiseMode::PerSeries;
  DynamicsMode dynamics = DynamicsMode::FullVar;
  int burn_in = 1000;   // m1
  int samples = 200;    // m2
  bool keep_quantiles = true;
  int threads = 1;

  void validate(int n_steps) const;
};

const char* to_string(NoiseMode mode);
const char* to_string(DynamicsMode mode);

}  // namespace btf
