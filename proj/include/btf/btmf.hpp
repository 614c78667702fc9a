// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "btf/distributions.hpp"
#include "btf/model_config.hpp"
#include "btf/rng.hpp"
#include "btf/series.hpp"
#include "btf/spd_matrix.hpp"
#include "btf/summary.hpp"

namespace btf {

// Conditional posterior parameter bundles. Factor conditionals are returned
// in precision form; draws back-solve against the cached Cholesky factor
// instead of inverting.
struct ConditionalGaussian {
  Eigen::VectorXd mean;
  SpdMatrix precision;
  Eigen::MatrixXd covariance() const { return precision.inverse(); }
};

struct GaussianWishartPosterior {
  Eigen::VectorXd mean;           // mu*
  double scale_count = 0.0;       // beta*
  Eigen::MatrixXd wishart_scale;  // W*
  double dof = 0.0;               // nu*
};

struct MniwPosterior {
  Eigen::MatrixXd coef_mean;       // M*, (R d) x R
  Eigen::MatrixXd coef_row_scale;  // Psi*
  Eigen::MatrixXd cov_scale;       // S*
  double dof = 0.0;                // nu*
};

struct IwPosterior {
  Eigen::MatrixXd cov_scale;
  double dof = 0.0;
};

struct GammaPosterior {
  double shape = 0.0;
  double rate = 0.0;
};

// Gibbs state. Factor vectors are columns: spatial(:, i) = w_i,
// temporal(:, t) = x_t. var_coefs stacks the transposed lag coefficient
// matrices, block k (rows k*R .. k*R+R-1) holding A_k^T, so that
// x_t = var_coefs^T * [x_{t-h_1}; ...; x_{t-h_d}] + innovation.
struct BtmfState {
  Eigen::MatrixXd spatial;         // R x N
  Eigen::MatrixXd temporal;        // R x T
  Eigen::MatrixXd var_coefs;       // (R d) x R
  Eigen::MatrixXd innovation_cov;  // R x R
  Eigen::VectorXd tau;             // N (per-series) or 1 (isotropic)
  Eigen::VectorXd mu_w;            // R
  Eigen::MatrixXd lambda_w;        // R x R

  static BtmfState initial(const SeriesMatrix& data, const ModelConfig& config, Rng& rng);
};

// Per-sweep context for the single-site temporal conditionals; caches
// Sigma^{-1}, A_k^T Sigma^{-1} and A_k^T Sigma^{-1} A_k.
class VarConditional {
 public:
  VarConditional(const Eigen::MatrixXd& var_coefs, const SpdMatrix& innovation_cov,
                 const LagSet& lags);

  // Adds the dynamics terms (M_t + P_t, N_t + Q_t) for position t of a
  // series truncated at t_limit columns of `temporal`.
  void add_prior_terms(int t, int t_limit, const Eigen::MatrixXd& temporal,
                       Eigen::MatrixXd& precision, Eigen::VectorXd& shift) const;

  const LagSet& lags() const { return lags_; }
  // One-step-ahead VAR mean at position t (requires t >= max lag).
  Eigen::VectorXd predict(int t, const Eigen::MatrixXd& temporal) const;

 private:
  LagSet lags_;
  Eigen::MatrixXd prec_;                      // Sigma^{-1}
  std::vector<Eigen::MatrixXd> coef_;         // A_k
  std::vector<Eigen::MatrixXd> coef_t_prec_;  // A_k^T Sigma^{-1}
  std::vector<Eigen::MatrixXd> gram_;         // A_k^T Sigma^{-1} A_k
};

double tau_for(const Eigen::VectorXd& tau, int i);

// Gaussian-Wishart update for the factor hyperparameters, from the factor
// columns. With zero columns the prior parameters are returned exactly.
GaussianWishartPosterior posterior_factor_hyper(const Eigen::MatrixXd& factors,
                                                const HyperPriors& priors);

// Matrix-normal-inverse-Wishart update for (A, Sigma) from the temporal
// factor matrix.
MniwPosterior posterior_dynamics(const Eigen::MatrixXd& temporal, const LagSet& lags,
                                 const HyperPriors& priors);

// Inverse-Wishart update of the innovation covariance when the coefficient
// matrix is held fixed.
IwPosterior posterior_innovation_given_coefs(const Eigen::MatrixXd& temporal,
                                             const LagSet& lags, const HyperPriors& priors,
                                             const Eigen::MatrixXd& var_coefs);

ConditionalGaussian posterior_spatial_factor(int series, const SeriesMatrix& data,
                                             const Eigen::MatrixXd& temporal, double tau_i,
                                             const Eigen::VectorXd& mu_w,
                                             const SpdMatrix& lambda_w);

ConditionalGaussian posterior_temporal_factor(int t, const SeriesMatrix& data,
                                              const Eigen::MatrixXd& spatial,
                                              const Eigen::VectorXd& tau,
                                              const Eigen::MatrixXd& var_coefs,
                                              const SpdMatrix& innovation_cov,
                                              const LagSet& lags,
                                              const Eigen::MatrixXd& temporal);

// Completes a temporal conditional from pre-assembled likelihood terms.
// The dynamics terms stop at the current length of `temporal`, so a series
// grown column-by-column (rolling prediction) never reads past its end.
ConditionalGaussian finish_temporal_conditional(int t, const VarConditional& ctx,
                                                const Eigen::MatrixXd& temporal,
                                                Eigen::MatrixXd likelihood_precision,
                                                Eigen::VectorXd likelihood_shift);

// Matrix-likelihood temporal conditional against an existing dynamics
// context; data may extend beyond temporal, only column t is read.
ConditionalGaussian temporal_conditional(int t, const SeriesMatrix& data,
                                         const Eigen::MatrixXd& spatial,
                                         const Eigen::VectorXd& tau,
                                         const VarConditional& ctx,
                                         const Eigen::MatrixXd& temporal);

GammaPosterior posterior_precision(int series, const SeriesMatrix& data,
                                   const Eigen::MatrixXd& spatial,
                                   const Eigen::MatrixXd& temporal,
                                   const HyperPriors& priors);

GammaPosterior posterior_precision_pooled(const SeriesMatrix& data,
                                          const Eigen::MatrixXd& spatial,
                                          const Eigen::MatrixXd& temporal,
                                          const HyperPriors& priors);

// Draws (A, Sigma) according to the dynamics mode; shared with the tensor
// sampler. Diagonal mode restricts each A_k to its diagonal and keeps only
// the diagonal of the sampled innovation covariance.
void sample_var_dynamics(const Eigen::MatrixXd& temporal, const LagSet& lags,
                         const HyperPriors& priors, DynamicsMode mode, Rng& rng,
                         Eigen::MatrixXd& var_coefs, Eigen::MatrixXd& innovation_cov);

// One full sweep in fixed order: factor hyperparameters, all spatial
// factors, (Sigma, A), temporal factors ascending in t, precisions.
void gibbs_step(BtmfState& state, const SeriesMatrix& data, const ModelConfig& config,
                const HyperPriors& priors, Rng& rng);

struct ChainSample {
  Eigen::MatrixXd spatial;
  Eigen::MatrixXd temporal;
  Eigen::MatrixXd var_coefs;
  Eigen::MatrixXd innovation_cov;
  Eigen::VectorXd tau;
};

struct ImputeOptions {
  bool keep_chain = false;
  // Called after every sweep (0-based index over burn-in + retained).
  std::function<void(int, const BtmfState&)> sweep_hook;
};

struct ImputeResult {
  PosteriorSummary summary;
  std::vector<ChainSample> chain;   // retained draws, when requested
  std::vector<double> fit_rmse;     // observed-cell RMSE per sweep
};

// Burn-in then retained sweeps; the summary averages the reconstructions
// W^T X over the retained draws.
ImputeResult impute(const SeriesMatrix& data, const ModelConfig& config,
                    const HyperPriors& priors, Rng& rng, const ImputeOptions& options = {});

}  // namespace btf
