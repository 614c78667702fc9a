// Apache License, Version 2.0, refer to LICENSE.txt
#include "btf/model_config.hpp"

#include <algorithm>
#include <stdexcept>

namespace btf {

LagSet::LagSet(std::vector<int> lags) : lags_(std::move(lags)) {
  if (lags_.empty()) throw std::invalid_argument("LagSet: needs at least one lag");
  std::sort(lags_.begin(), lags_.end());
  lags_.erase(std::unique(lags_.begin(), lags_.end()), lags_.end());
  if (lags_.front() < 1) throw std::invalid_argument("LagSet: lags must be positive");
}

HyperPriors HyperPriors::defaults(int rank, int order) {
  HyperPriors p;
  p.nu0 = rank;
  p.nu0_iw = rank;
  p.mu0 = Eigen::VectorXd::Zero(rank);
  p.w0 = Eigen::MatrixXd::Identity(rank, rank);
  p.s0 = Eigen::MatrixXd::Identity(rank, rank);
  p.psi0 = Eigen::MatrixXd::Identity(rank * order, rank * order);
  p.m0 = Eigen::MatrixXd::Zero(rank * order, rank);
  return p;
}

void HyperPriors::validate(int rank, int order) const {
  const int rd = rank * order;
  if (nu0 < rank) throw std::invalid_argument("HyperPriors: nu0 must be >= rank");
  if (nu0_iw < rank) throw std::invalid_argument("HyperPriors: nu0_iw must be >= rank");
  if (mu0.size() != rank) throw std::invalid_argument("HyperPriors: mu0 must have length rank");
  if (w0.rows() != rank || w0.cols() != rank) throw std::invalid_argument("HyperPriors: w0 must be rank x rank");
  if (s0.rows() != rank || s0.cols() != rank) throw std::invalid_argument("HyperPriors: s0 must be rank x rank");
  if (psi0.rows() != rd || psi0.cols() != rd) throw std::invalid_argument("HyperPriors: psi0 must be (rank*order) square");
  if (m0.rows() != rd || m0.cols() != rank) throw std::invalid_argument("HyperPriors: m0 must be (rank*order) x rank");
  if (!(gamma_shape > 0.0) || !(gamma_rate > 0.0)) {
    throw std::invalid_argument("HyperPriors: gamma parameters must be positive");
  }
}

void ModelConfig::validate(int n_steps) const {
  if (rank < 1) throw std::invalid_argument("ModelConfig: rank must be >= 1");
  if (samples < 1) throw std::invalid_argument("ModelConfig: samples must be >= 1");
  if (burn_in < 0) throw std::invalid_argument("ModelConfig: burn_in must be >= 0");
  if (threads < 1) throw std::invalid_argument("ModelConfig: threads must be >= 1");
  if (lags.max_lag() >= n_steps) {
    throw std::invalid_argument("ModelConfig: largest lag must be smaller than the series length");
  }
  if (dynamics == DynamicsMode::FixedIdentity &&
      (lags.order() != 1 || lags.max_lag() != 1)) {
    throw std::invalid_argument("ModelConfig: fixed-identity dynamics require the lag set {1}");
  }
}

const char* to_string(NoiseMode mode) {
  return mode == NoiseMode::PerSeries ? "per-series" : "isotropic";
}

const char* to_string(DynamicsMode mode) {
  switch (mode) {
    case DynamicsMode::FullVar: return "var";
    case DynamicsMode::DiagonalAr: return "ar";
    default: return "identity";
  }
}

}  // namespace btf
