// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "btf/btmf.hpp"
#include "btf/model_config.hpp"
#include "btf/series.hpp"
#include "btf/summary.hpp"

namespace btf {

enum class CpMode { U, V };

// CP factorization state: columns are per-entity factor vectors, u(:, i),
// v(:, j), temporal(:, t); row r spans rank-one component r. tau is 1 x 1
// in isotropic mode or dim0 x dim1 per (i, j) fiber. Dynamics follow the
// matrix model on the shared temporal factors.
struct BttfState {
  Eigen::MatrixXd u;               // R x M
  Eigen::MatrixXd v;               // R x N
  Eigen::MatrixXd temporal;        // R x T
  Eigen::MatrixXd var_coefs;       // (R d) x R
  Eigen::MatrixXd innovation_cov;  // R x R
  Eigen::MatrixXd tau;             // 1 x 1 or M x N
  Eigen::VectorXd mu_u, mu_v;
  Eigen::MatrixXd lambda_u, lambda_v;

  static BttfState initial(const SeriesTensor& data, const ModelConfig& config, Rng& rng);
};

double tau_at(const Eigen::MatrixXd& tau, int i, int j);

// Conditional for one factor of mode U (over v_j * x_t products) or mode V
// (over u_i * x_t). A fully missing slab falls back to the prior exactly.
ConditionalGaussian posterior_mode_factor(CpMode mode, int index, const SeriesTensor& data,
                                          const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                                          const Eigen::MatrixXd& temporal,
                                          const Eigen::MatrixXd& tau,
                                          const Eigen::VectorXd& mu_mode,
                                          const SpdMatrix& lambda_mode);

ConditionalGaussian posterior_temporal_factor_cp(int t, const SeriesTensor& data,
                                                 const Eigen::MatrixXd& u,
                                                 const Eigen::MatrixXd& v,
                                                 const Eigen::MatrixXd& tau,
                                                 const Eigen::MatrixXd& var_coefs,
                                                 const SpdMatrix& innovation_cov,
                                                 const LagSet& lags,
                                                 const Eigen::MatrixXd& temporal);

// Tensor-likelihood temporal conditional against an existing dynamics context.
ConditionalGaussian temporal_conditional_cp(int t, const SeriesTensor& data,
                                            const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                                            const Eigen::MatrixXd& tau,
                                            const VarConditional& ctx,
                                            const Eigen::MatrixXd& temporal);

GammaPosterior posterior_precision_cp_pooled(const SeriesTensor& data, const Eigen::MatrixXd& u,
                                             const Eigen::MatrixXd& v,
                                             const Eigen::MatrixXd& temporal,
                                             const HyperPriors& priors);

GammaPosterior posterior_precision_cp_fiber(int i, int j, const SeriesTensor& data,
                                            const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                                            const Eigen::MatrixXd& temporal,
                                            const HyperPriors& priors);

// One sweep: hyperparameters for both modes, all u_i, all v_j, (Sigma, A),
// temporal factors ascending, then the precision field. freeze_v skips the
// v_j draws (reduction test harness only). Per-pair precisions with fewer
// than three observations in a fiber reuse the pooled draw.
void gibbs_step_tensor(BttfState& state, const SeriesTensor& data, const ModelConfig& config,
                       const HyperPriors& priors, Rng& rng, bool freeze_v = false);

double cp_value(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                const Eigen::MatrixXd& temporal, int i, int j, int t);

struct ChainSampleCp {
  Eigen::MatrixXd u, v, temporal, var_coefs, innovation_cov, tau;
};

struct TensorImputeOptions {
  bool keep_chain = false;
  std::function<void(int, const BttfState&)> sweep_hook;
};

struct TensorImputeResult {
  TensorPosteriorSummary summary;
  std::vector<ChainSampleCp> chain;
  std::vector<double> fit_rmse;
};

TensorImputeResult impute_tensor(const SeriesTensor& data, const ModelConfig& config,
                                 const HyperPriors& priors, Rng& rng,
                                 const TensorImputeOptions& options = {});

}  // namespace btf
