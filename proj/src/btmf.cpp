// Apache License, Version 2.0, refer to LICENSE.txt
#include "btf/btmf.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "btf/errors.hpp"
#include "btf/parallel.hpp"

namespace btf {

namespace {

// Re-throws factorization failures tagged with the sampling phase.
template <class Fn>
void phase(const char* name, Fn&& fn) {
  try {
    fn();
  } catch (const IndefiniteMatrixError& e) {
    throw IndefiniteMatrixError(e.pivot(), std::string("while sampling ") + name + ": " + e.what());
  }
}

struct Regression {
  Eigen::MatrixXd z;  // (T - h_d) x R, responses
  Eigen::MatrixXd q;  // (T - h_d) x (R d), lagged regressors
};

Regression build_regression(const Eigen::MatrixXd& temporal, const LagSet& lags) {
  const int r = static_cast<int>(temporal.rows());
  const int t_total = static_cast<int>(temporal.cols());
  const int h_d = lags.max_lag();
  const int rows = t_total - h_d;
  Regression reg;
  reg.z.resize(rows, r);
  reg.q.resize(rows, r * lags.order());
  for (int m = 0; m < rows; ++m) {
    const int t = h_d + m;
    reg.z.row(m) = temporal.col(t).transpose();
    for (int k = 0; k < lags.order(); ++k) {
      reg.q.block(m, k * r, 1, r) = temporal.col(t - lags.lag(k)).transpose();
    }
  }
  return reg;
}

}  // namespace

double tau_for(const Eigen::VectorXd& tau, int i) {
  return tau.size() == 1 ? tau(0) : tau(i);
}

BtmfState BtmfState::initial(const SeriesMatrix& data, const ModelConfig& config, Rng& rng) {
  const int r = config.rank;
  const int n = data.n_series();
  const int t = data.n_steps();
  const int rd = r * config.lags.order();
  BtmfState state;
  state.spatial.resize(r, n);
  state.temporal.resize(r, t);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < r; ++k) state.spatial(k, j) = rng.normal();
  }
  for (int j = 0; j < t; ++j) {
    for (int k = 0; k < r; ++k) state.temporal(k, j) = rng.normal();
  }
  state.var_coefs = config.dynamics == DynamicsMode::FixedIdentity
                        ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(rd, r))
                        : Eigen::MatrixXd(Eigen::MatrixXd::Zero(rd, r));
  state.innovation_cov = Eigen::MatrixXd::Identity(r, r);
  state.tau = Eigen::VectorXd::Ones(config.noise == NoiseMode::PerSeries ? n : 1);
  state.mu_w = Eigen::VectorXd::Zero(r);
  state.lambda_w = Eigen::MatrixXd::Identity(r, r);
  return state;
}

VarConditional::VarConditional(const Eigen::MatrixXd& var_coefs,
                               const SpdMatrix& innovation_cov, const LagSet& lags)
    : lags_(lags), prec_(innovation_cov.inverse()) {
  const int r = static_cast<int>(var_coefs.cols());
  coef_.reserve(lags_.order());
  coef_t_prec_.reserve(lags_.order());
  gram_.reserve(lags_.order());
  for (int k = 0; k < lags_.order(); ++k) {
    Eigen::MatrixXd a_k = var_coefs.block(k * r, 0, r, r).transpose();
    coef_t_prec_.push_back(a_k.transpose() * prec_);
    gram_.push_back(coef_t_prec_.back() * a_k);
    coef_.push_back(std::move(a_k));
  }
}

Eigen::VectorXd VarConditional::predict(int t, const Eigen::MatrixXd& temporal) const {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(temporal.rows());
  for (int k = 0; k < lags_.order(); ++k) {
    mean.noalias() += coef_[k] * temporal.col(t - lags_.lag(k));
  }
  return mean;
}

void VarConditional::add_prior_terms(int t, int t_limit, const Eigen::MatrixXd& temporal,
                                     Eigen::MatrixXd& precision, Eigen::VectorXd& shift) const {
  const int h_d = lags_.max_lag();
  if (t < h_d) {
    precision.diagonal().array() += 1.0;  // x_t ~ N(0, I) prior branch
  } else {
    precision += prec_;
    shift.noalias() += prec_ * predict(t, temporal);
  }
  for (int k = 0; k < lags_.order(); ++k) {
    const int f = t + lags_.lag(k);
    if (f < h_d || f >= t_limit) continue;
    precision += gram_[k];
    Eigen::VectorXd psi = temporal.col(f);
    for (int l = 0; l < lags_.order(); ++l) {
      if (l == k) continue;
      psi.noalias() -= coef_[l] * temporal.col(f - lags_.lag(l));
    }
    shift.noalias() += coef_t_prec_[k] * psi;
  }
}

GaussianWishartPosterior posterior_factor_hyper(const Eigen::MatrixXd& factors,
                                                const HyperPriors& priors) {
  const auto n = factors.cols();
  if (n == 0) {
    return {priors.mu0, priors.beta0, priors.w0, priors.nu0};
  }
  const double dn = static_cast<double>(n);
  const Eigen::VectorXd mean_col = factors.rowwise().mean();
  const Eigen::MatrixXd centered = factors.colwise() - mean_col;
  const Eigen::MatrixXd cov = centered * centered.transpose() / dn;  // biased
  const Eigen::VectorXd diff = mean_col - priors.mu0;

  GaussianWishartPosterior post;
  post.mean = (priors.beta0 * priors.mu0 + dn * mean_col) / (priors.beta0 + dn);
  post.scale_count = priors.beta0 + dn;
  post.dof = priors.nu0 + dn;
  Eigen::MatrixXd scale_inv = SpdMatrix(priors.w0).inverse() + dn * cov +
                              (priors.beta0 * dn / (priors.beta0 + dn)) * diff * diff.transpose();
  post.wishart_scale = SpdMatrix(std::move(scale_inv)).inverse();
  return post;
}

MniwPosterior posterior_dynamics(const Eigen::MatrixXd& temporal, const LagSet& lags,
                                 const HyperPriors& priors) {
  const int t_total = static_cast<int>(temporal.cols());
  if (t_total <= lags.max_lag()) {
    return {priors.m0, priors.psi0, priors.s0, priors.nu0_iw};
  }
  const Regression reg = build_regression(temporal, lags);
  const SpdMatrix psi0(priors.psi0);
  const Eigen::MatrixXd psi0_inv = psi0.inverse();

  SpdMatrix psi_star_inv(psi0_inv + reg.q.transpose() * reg.q);
  const Eigen::MatrixXd b = psi0_inv * priors.m0 + reg.q.transpose() * reg.z;

  MniwPosterior post;
  post.coef_mean = psi_star_inv.solve(b);
  post.coef_row_scale = psi_star_inv.inverse();
  Eigen::MatrixXd s = priors.s0 + reg.z.transpose() * reg.z +
                      priors.m0.transpose() * psi0_inv * priors.m0 -
                      post.coef_mean.transpose() * b;
  post.cov_scale = 0.5 * (s + s.transpose());
  post.dof = priors.nu0_iw + (t_total - lags.max_lag());
  return post;
}

IwPosterior posterior_innovation_given_coefs(const Eigen::MatrixXd& temporal,
                                             const LagSet& lags, const HyperPriors& priors,
                                             const Eigen::MatrixXd& var_coefs) {
  const int t_total = static_cast<int>(temporal.cols());
  if (t_total <= lags.max_lag()) {
    return {priors.s0, priors.nu0_iw};
  }
  const Regression reg = build_regression(temporal, lags);
  const Eigen::MatrixXd resid = reg.z - reg.q * var_coefs;
  Eigen::MatrixXd s = priors.s0 + resid.transpose() * resid;
  return {0.5 * (s + s.transpose()), priors.nu0_iw + (t_total - lags.max_lag())};
}

ConditionalGaussian posterior_spatial_factor(int series, const SeriesMatrix& data,
                                             const Eigen::MatrixXd& temporal, double tau_i,
                                             const Eigen::VectorXd& mu_w,
                                             const SpdMatrix& lambda_w) {
  if (!data.mask.row(series).any()) {
    return {mu_w, lambda_w};  // prior fallback
  }
  Eigen::MatrixXd precision = lambda_w.matrix();
  Eigen::VectorXd shift = lambda_w.matrix() * mu_w;
  for (int t = 0; t < data.n_steps(); ++t) {
    if (!data.observed(series, t)) continue;
    const auto x = temporal.col(t);
    precision.noalias() += tau_i * x * x.transpose();
    shift.noalias() += tau_i * data.values(series, t) * x;
  }
  SpdMatrix p(std::move(precision));
  Eigen::VectorXd mean = p.solve(shift);
  return {std::move(mean), std::move(p)};
}

ConditionalGaussian finish_temporal_conditional(int t, const VarConditional& ctx,
                                                const Eigen::MatrixXd& temporal,
                                                Eigen::MatrixXd likelihood_precision,
                                                Eigen::VectorXd likelihood_shift) {
  ctx.add_prior_terms(t, static_cast<int>(temporal.cols()), temporal,
                      likelihood_precision, likelihood_shift);
  SpdMatrix p(std::move(likelihood_precision));
  Eigen::VectorXd mean = p.solve(likelihood_shift);
  return {std::move(mean), std::move(p)};
}

ConditionalGaussian temporal_conditional(int t, const SeriesMatrix& data,
                                         const Eigen::MatrixXd& spatial,
                                         const Eigen::VectorXd& tau,
                                         const VarConditional& ctx,
                                         const Eigen::MatrixXd& temporal) {
  const int r = static_cast<int>(spatial.rows());
  Eigen::MatrixXd precision = Eigen::MatrixXd::Zero(r, r);
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(r);
  for (int i = 0; i < data.n_series(); ++i) {
    if (!data.observed(i, t)) continue;
    const double tau_i = tau_for(tau, i);
    const auto w = spatial.col(i);
    precision.noalias() += tau_i * w * w.transpose();
    shift.noalias() += tau_i * data.values(i, t) * w;
  }
  return finish_temporal_conditional(t, ctx, temporal, std::move(precision), std::move(shift));
}

ConditionalGaussian posterior_temporal_factor(int t, const SeriesMatrix& data,
                                              const Eigen::MatrixXd& spatial,
                                              const Eigen::VectorXd& tau,
                                              const Eigen::MatrixXd& var_coefs,
                                              const SpdMatrix& innovation_cov,
                                              const LagSet& lags,
                                              const Eigen::MatrixXd& temporal) {
  const VarConditional ctx(var_coefs, innovation_cov, lags);
  return temporal_conditional(t, data, spatial, tau, ctx, temporal);
}

GammaPosterior posterior_precision(int series, const SeriesMatrix& data,
                                   const Eigen::MatrixXd& spatial,
                                   const Eigen::MatrixXd& temporal,
                                   const HyperPriors& priors) {
  double count = 0.0;
  double ss = 0.0;
  const auto w = spatial.col(series);
  for (int t = 0; t < data.n_steps(); ++t) {
    if (!data.observed(series, t)) continue;
    const double resid = data.values(series, t) - w.dot(temporal.col(t));
    ss += resid * resid;
    count += 1.0;
  }
  return {priors.gamma_shape + 0.5 * count, priors.gamma_rate + 0.5 * ss};
}

GammaPosterior posterior_precision_pooled(const SeriesMatrix& data,
                                          const Eigen::MatrixXd& spatial,
                                          const Eigen::MatrixXd& temporal,
                                          const HyperPriors& priors) {
  double count = 0.0;
  double ss = 0.0;
  for (int i = 0; i < data.n_series(); ++i) {
    const auto w = spatial.col(i);
    for (int t = 0; t < data.n_steps(); ++t) {
      if (!data.observed(i, t)) continue;
      const double resid = data.values(i, t) - w.dot(temporal.col(t));
      ss += resid * resid;
      count += 1.0;
    }
  }
  return {priors.gamma_shape + 0.5 * count, priors.gamma_rate + 0.5 * ss};
}

void sample_var_dynamics(const Eigen::MatrixXd& temporal, const LagSet& lags,
                         const HyperPriors& priors, DynamicsMode mode, Rng& rng,
                         Eigen::MatrixXd& var_coefs, Eigen::MatrixXd& innovation_cov) {
  const int r = static_cast<int>(temporal.rows());
  if (mode == DynamicsMode::FixedIdentity) {
    const IwPosterior iw = posterior_innovation_given_coefs(temporal, lags, priors, var_coefs);
    innovation_cov = sample_inv_wishart(SpdMatrix(iw.cov_scale), iw.dof, rng).matrix();
    return;
  }

  const MniwPosterior post = posterior_dynamics(temporal, lags, priors);
  const SpdMatrix sigma = sample_inv_wishart(SpdMatrix(post.cov_scale), post.dof, rng);

  if (mode == DynamicsMode::FullVar) {
    innovation_cov = sigma.matrix();
    var_coefs = sample_matrix_normal(post.coef_mean, SpdMatrix(post.coef_row_scale), sigma, rng);
    return;
  }

  // Diagonal restriction: the innovation covariance acts through its
  // diagonal, and each factor keeps its own d-dimensional lag coefficient
  // vector with the conjugate scalar-regression update.
  innovation_cov = sigma.matrix().diagonal().asDiagonal();
  const int d = lags.order();
  const int h_d = lags.max_lag();
  const int t_total = static_cast<int>(temporal.cols());
  var_coefs = Eigen::MatrixXd::Zero(r * d, r);
  for (int fac = 0; fac < r; ++fac) {
    Eigen::MatrixXd prior_scale(d, d);
    Eigen::VectorXd prior_mean(d);
    for (int k = 0; k < d; ++k) {
      prior_mean(k) = priors.m0(k * r + fac, fac);
      for (int l = 0; l < d; ++l) prior_scale(k, l) = priors.psi0(k * r + fac, l * r + fac);
    }
    const Eigen::MatrixXd prior_prec = SpdMatrix(prior_scale).inverse();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd moment = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd lagged(d);
    for (int t = h_d; t < t_total; ++t) {
      for (int k = 0; k < d; ++k) lagged(k) = temporal(fac, t - lags.lag(k));
      gram.noalias() += lagged * lagged.transpose();
      moment.noalias() += lagged * temporal(fac, t);
    }
    SpdMatrix coef_prec(prior_prec + gram);
    const Eigen::VectorXd prior_shift = prior_prec * prior_mean + moment;
    const Eigen::VectorXd coef_mean = coef_prec.solve(prior_shift);
    const double sigma_rr = innovation_cov(fac, fac);
    const Eigen::VectorXd theta =
        sample_mvn(coef_mean, SpdMatrix(coef_prec.matrix() / sigma_rr), MvnParam::Precision, rng);
    for (int k = 0; k < d; ++k) var_coefs(k * r + fac, fac) = theta(k);
  }
}

void gibbs_step(BtmfState& state, const SeriesMatrix& data, const ModelConfig& config,
                const HyperPriors& priors, Rng& rng) {
  phase("factor hyperparameters", [&] {
    const GaussianWishartPosterior gw = posterior_factor_hyper(state.spatial, priors);
    const SpdMatrix lambda = sample_wishart(SpdMatrix(gw.wishart_scale), gw.dof, rng);
    state.lambda_w = lambda.matrix();
    state.mu_w = sample_mvn(gw.mean, SpdMatrix(gw.scale_count * lambda.matrix()),
                            MvnParam::Precision, rng);
  });

  phase("spatial factors", [&] {
    const SpdMatrix lambda_w(state.lambda_w);
    lambda_w.cholesky();
    parallel_for_indexed(data.n_series(), config.threads, rng, [&](int i, Rng& stream) {
      const ConditionalGaussian cg =
          posterior_spatial_factor(i, data, state.temporal, tau_for(state.tau, i),
                                   state.mu_w, lambda_w);
      state.spatial.col(i) = sample_mvn(cg.mean, cg.precision, MvnParam::Precision, stream);
    });
  });

  phase("dynamics", [&] {
    sample_var_dynamics(state.temporal, config.lags, priors, config.dynamics, rng,
                        state.var_coefs, state.innovation_cov);
  });

  phase("temporal factors", [&] {
    const VarConditional ctx(state.var_coefs, SpdMatrix(state.innovation_cov), config.lags);
    for (int t = 0; t < data.n_steps(); ++t) {
      const ConditionalGaussian cg =
          temporal_conditional(t, data, state.spatial, state.tau, ctx, state.temporal);
      state.temporal.col(t) = sample_mvn(cg.mean, cg.precision, MvnParam::Precision, rng);
    }
  });

  phase("noise precisions", [&] {
    if (config.noise == NoiseMode::Isotropic) {
      const GammaPosterior g = posterior_precision_pooled(data, state.spatial, state.temporal, priors);
      state.tau(0) = sample_gamma(g.shape, g.rate, rng);
    } else {
      parallel_for_indexed(data.n_series(), config.threads, rng, [&](int i, Rng& stream) {
        const GammaPosterior g = posterior_precision(i, data, state.spatial, state.temporal, priors);
        state.tau(i) = sample_gamma(g.shape, g.rate, stream);
      });
    }
  });
}

ImputeResult impute(const SeriesMatrix& data, const ModelConfig& config,
                    const HyperPriors& priors, Rng& rng, const ImputeOptions& options) {
  data.validate();
  config.validate(data.n_steps());
  priors.validate(config.rank, config.lags.order());

  const int n = data.n_series();
  const int t_total = data.n_steps();

  ImputeResult result;
  for (int i = 0; i < n; ++i) {
    if (!data.mask.row(i).any()) result.summary.empty_series.push_back(i);
  }

  BtmfState state = BtmfState::initial(data, config, rng);
  SummaryAccumulator acc(static_cast<std::size_t>(n) * t_total, config.keep_quantiles);
  result.fit_rmse.reserve(config.burn_in + config.samples);
  if (options.keep_chain) result.chain.reserve(config.samples);

  const int total = config.burn_in + config.samples;
  for (int sweep = 0; sweep < total; ++sweep) {
    try {
      gibbs_step(state, data, config, priors, rng);
    } catch (const IndefiniteMatrixError& e) {
      throw IndefiniteMatrixError(e.pivot(), "sweep " + std::to_string(sweep) + ": " + e.what());
    }

    const Eigen::MatrixXd recon = state.spatial.transpose() * state.temporal;
    double ss = 0.0;
    std::int64_t count = 0;
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < t_total; ++t) {
        if (!data.observed(i, t)) continue;
        const double d = data.values(i, t) - recon(i, t);
        ss += d * d;
        ++count;
      }
    }
    result.fit_rmse.push_back(count ? std::sqrt(ss / static_cast<double>(count)) : 0.0);

    if (sweep >= config.burn_in) {
      acc.add({recon.data(), static_cast<std::size_t>(recon.size())});
      if (options.keep_chain) {
        result.chain.push_back({state.spatial, state.temporal, state.var_coefs,
                                state.innovation_cov, state.tau});
      }
    }
    if (options.sweep_hook) options.sweep_hook(sweep, state);
  }

  auto reshape = [&](const std::vector<double>& flat) {
    return Eigen::Map<const Eigen::MatrixXd>(flat.data(), n, t_total).eval();
  };
  result.summary.mean = reshape(acc.mean());
  result.summary.stddev = reshape(acc.stddev());
  if (config.keep_quantiles) {
    result.summary.q05 = reshape(acc.quantile(0.05));
    result.summary.q95 = reshape(acc.quantile(0.95));
  }
  result.summary.sample_count = acc.count();
  return result;
}

}  // namespace btf
