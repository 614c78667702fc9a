// Apache License, Version 2.0, refer to LICENSE.txt
#include "btf/bttf.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "btf/errors.hpp"
#include "btf/parallel.hpp"

namespace btf {

namespace {

template <class Fn>
void phase(const char* name, Fn&& fn) {
  try {
    fn();
  } catch (const IndefiniteMatrixError& e) {
    throw IndefiniteMatrixError(e.pivot(), std::string("while sampling ") + name + ": " + e.what());
  }
}

constexpr int kMinFiberObs = 3;  // below this, per-pair precision pools

Eigen::MatrixXd fiber_counts(const SeriesTensor& data) {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(data.dim0(), data.dim1());
  for (int i = 0; i < data.dim0(); ++i) {
    for (int j = 0; j < data.dim1(); ++j) {
      for (int t = 0; t < data.n_steps(); ++t) counts(i, j) += data.observed(i, j, t);
    }
  }
  return counts;
}

}  // namespace

double tau_at(const Eigen::MatrixXd& tau, int i, int j) {
  return tau.size() == 1 ? tau(0, 0) : tau(i, j);
}

double cp_value(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                const Eigen::MatrixXd& temporal, int i, int j, int t) {
  return (u.col(i).array() * v.col(j).array() * temporal.col(t).array()).sum();
}

BttfState BttfState::initial(const SeriesTensor& data, const ModelConfig& config, Rng& rng) {
  const int r = config.rank;
  const int rd = r * config.lags.order();
  BttfState state;
  auto fill_normal = [&](Eigen::MatrixXd& m, int rows, int cols) {
    m.resize(rows, cols);
    for (int c = 0; c < cols; ++c) {
      for (int k = 0; k < rows; ++k) m(k, c) = rng.normal();
    }
  };
  fill_normal(state.u, r, data.dim0());
  fill_normal(state.v, r, data.dim1());
  fill_normal(state.temporal, r, data.n_steps());
  state.var_coefs = config.dynamics == DynamicsMode::FixedIdentity
                        ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(rd, r))
                        : Eigen::MatrixXd(Eigen::MatrixXd::Zero(rd, r));
  state.innovation_cov = Eigen::MatrixXd::Identity(r, r);
  state.tau = config.noise == NoiseMode::PerSeries
                  ? Eigen::MatrixXd::Ones(data.dim0(), data.dim1())
                  : Eigen::MatrixXd::Ones(1, 1);
  state.mu_u = Eigen::VectorXd::Zero(r);
  state.mu_v = Eigen::VectorXd::Zero(r);
  state.lambda_u = Eigen::MatrixXd::Identity(r, r);
  state.lambda_v = Eigen::MatrixXd::Identity(r, r);
  return state;
}

ConditionalGaussian posterior_mode_factor(CpMode mode, int index, const SeriesTensor& data,
                                          const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                                          const Eigen::MatrixXd& temporal,
                                          const Eigen::MatrixXd& tau,
                                          const Eigen::VectorXd& mu_mode,
                                          const SpdMatrix& lambda_mode) {
  const int r = static_cast<int>(temporal.rows());
  const Eigen::MatrixXd& other = mode == CpMode::U ? v : u;
  const int n_other = static_cast<int>(other.cols());

  Eigen::MatrixXd precision = Eigen::MatrixXd::Zero(r, r);
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(r);
  bool any = false;
  Eigen::VectorXd w(r);
  for (int o = 0; o < n_other; ++o) {
    const int i = mode == CpMode::U ? index : o;
    const int j = mode == CpMode::U ? o : index;
    for (int t = 0; t < data.n_steps(); ++t) {
      if (!data.observed(i, j, t)) continue;
      any = true;
      const double tij = tau_at(tau, i, j);
      w = other.col(o).array() * temporal.col(t).array();
      precision.noalias() += tij * w * w.transpose();
      shift.noalias() += tij * data.values(i, j, t) * w;
    }
  }
  if (!any) {
    return {mu_mode, lambda_mode};  // prior fallback
  }
  precision += lambda_mode.matrix();
  shift.noalias() += lambda_mode.matrix() * mu_mode;
  SpdMatrix p(std::move(precision));
  Eigen::VectorXd mean = p.solve(shift);
  return {std::move(mean), std::move(p)};
}

ConditionalGaussian temporal_conditional_cp(int t, const SeriesTensor& data,
                                            const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                                            const Eigen::MatrixXd& tau,
                                            const VarConditional& ctx,
                                            const Eigen::MatrixXd& temporal) {
  const int r = static_cast<int>(temporal.rows());
  Eigen::MatrixXd precision = Eigen::MatrixXd::Zero(r, r);
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(r);
  Eigen::VectorXd w(r);
  for (int i = 0; i < data.dim0(); ++i) {
    for (int j = 0; j < data.dim1(); ++j) {
      if (!data.observed(i, j, t)) continue;
      const double tij = tau_at(tau, i, j);
      w = u.col(i).array() * v.col(j).array();
      precision.noalias() += tij * w * w.transpose();
      shift.noalias() += tij * data.values(i, j, t) * w;
    }
  }
  return finish_temporal_conditional(t, ctx, temporal, std::move(precision), std::move(shift));
}

ConditionalGaussian posterior_temporal_factor_cp(int t, const SeriesTensor& data,
                                                 const Eigen::MatrixXd& u,
                                                 const Eigen::MatrixXd& v,
                                                 const Eigen::MatrixXd& tau,
                                                 const Eigen::MatrixXd& var_coefs,
                                                 const SpdMatrix& innovation_cov,
                                                 const LagSet& lags,
                                                 const Eigen::MatrixXd& temporal) {
  const VarConditional ctx(var_coefs, innovation_cov, lags);
  return temporal_conditional_cp(t, data, u, v, tau, ctx, temporal);
}

GammaPosterior posterior_precision_cp_pooled(const SeriesTensor& data, const Eigen::MatrixXd& u,
                                             const Eigen::MatrixXd& v,
                                             const Eigen::MatrixXd& temporal,
                                             const HyperPriors& priors) {
  double count = 0.0;
  double ss = 0.0;
  for (int i = 0; i < data.dim0(); ++i) {
    for (int j = 0; j < data.dim1(); ++j) {
      for (int t = 0; t < data.n_steps(); ++t) {
        if (!data.observed(i, j, t)) continue;
        const double resid = data.values(i, j, t) - cp_value(u, v, temporal, i, j, t);
        ss += resid * resid;
        count += 1.0;
      }
    }
  }
  return {priors.gamma_shape + 0.5 * count, priors.gamma_rate + 0.5 * ss};
}

GammaPosterior posterior_precision_cp_fiber(int i, int j, const SeriesTensor& data,
                                            const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                                            const Eigen::MatrixXd& temporal,
                                            const HyperPriors& priors) {
  double count = 0.0;
  double ss = 0.0;
  for (int t = 0; t < data.n_steps(); ++t) {
    if (!data.observed(i, j, t)) continue;
    const double resid = data.values(i, j, t) - cp_value(u, v, temporal, i, j, t);
    ss += resid * resid;
    count += 1.0;
  }
  return {priors.gamma_shape + 0.5 * count, priors.gamma_rate + 0.5 * ss};
}

void gibbs_step_tensor(BttfState& state, const SeriesTensor& data, const ModelConfig& config,
                       const HyperPriors& priors, Rng& rng, bool freeze_v) {
  phase("mode hyperparameters", [&] {
    const GaussianWishartPosterior gu = posterior_factor_hyper(state.u, priors);
    const SpdMatrix lambda_u = sample_wishart(SpdMatrix(gu.wishart_scale), gu.dof, rng);
    state.lambda_u = lambda_u.matrix();
    state.mu_u = sample_mvn(gu.mean, SpdMatrix(gu.scale_count * lambda_u.matrix()),
                            MvnParam::Precision, rng);
    const GaussianWishartPosterior gv = posterior_factor_hyper(state.v, priors);
    const SpdMatrix lambda_v = sample_wishart(SpdMatrix(gv.wishart_scale), gv.dof, rng);
    state.lambda_v = lambda_v.matrix();
    state.mu_v = sample_mvn(gv.mean, SpdMatrix(gv.scale_count * lambda_v.matrix()),
                            MvnParam::Precision, rng);
  });

  phase("mode-u factors", [&] {
    const SpdMatrix lambda_u(state.lambda_u);
    lambda_u.cholesky();
    parallel_for_indexed(data.dim0(), config.threads, rng, [&](int i, Rng& stream) {
      const ConditionalGaussian cg = posterior_mode_factor(
          CpMode::U, i, data, state.u, state.v, state.temporal, state.tau, state.mu_u, lambda_u);
      state.u.col(i) = sample_mvn(cg.mean, cg.precision, MvnParam::Precision, stream);
    });
  });

  if (!freeze_v) {
    phase("mode-v factors", [&] {
      const SpdMatrix lambda_v(state.lambda_v);
      lambda_v.cholesky();
      parallel_for_indexed(data.dim1(), config.threads, rng, [&](int j, Rng& stream) {
        const ConditionalGaussian cg = posterior_mode_factor(
            CpMode::V, j, data, state.u, state.v, state.temporal, state.tau, state.mu_v, lambda_v);
        state.v.col(j) = sample_mvn(cg.mean, cg.precision, MvnParam::Precision, stream);
      });
    });
  }

  phase("dynamics", [&] {
    sample_var_dynamics(state.temporal, config.lags, priors, config.dynamics, rng,
                        state.var_coefs, state.innovation_cov);
  });

  phase("temporal factors", [&] {
    const VarConditional ctx(state.var_coefs, SpdMatrix(state.innovation_cov), config.lags);
    for (int t = 0; t < data.n_steps(); ++t) {
      const ConditionalGaussian cg =
          temporal_conditional_cp(t, data, state.u, state.v, state.tau, ctx, state.temporal);
      state.temporal.col(t) = sample_mvn(cg.mean, cg.precision, MvnParam::Precision, rng);
    }
  });

  phase("noise precisions", [&] {
    const GammaPosterior pooled =
        posterior_precision_cp_pooled(data, state.u, state.v, state.temporal, priors);
    if (config.noise == NoiseMode::Isotropic) {
      state.tau(0, 0) = sample_gamma(pooled.shape, pooled.rate, rng);
      return;
    }
    const double pooled_draw = sample_gamma(pooled.shape, pooled.rate, rng);
    const Eigen::MatrixXd counts = fiber_counts(data);
    parallel_for_indexed(data.dim0(), config.threads, rng, [&](int i, Rng& stream) {
      for (int j = 0; j < data.dim1(); ++j) {
        if (counts(i, j) < kMinFiberObs) {
          state.tau(i, j) = pooled_draw;
          continue;
        }
        const GammaPosterior g =
            posterior_precision_cp_fiber(i, j, data, state.u, state.v, state.temporal, priors);
        state.tau(i, j) = sample_gamma(g.shape, g.rate, stream);
      }
    });
  });
}

TensorImputeResult impute_tensor(const SeriesTensor& data, const ModelConfig& config,
                                 const HyperPriors& priors, Rng& rng,
                                 const TensorImputeOptions& options) {
  data.validate();
  config.validate(data.n_steps());
  priors.validate(config.rank, config.lags.order());

  const int m = data.dim0();
  const int n = data.dim1();
  const int t_total = data.n_steps();
  const std::size_t cells = data.values.size();

  TensorImputeResult result;
  {
    const Eigen::MatrixXd counts = fiber_counts(data);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        if (counts(i, j) == 0.0) result.summary.empty_fibers.push_back({i, j});
      }
    }
  }

  BttfState state = BttfState::initial(data, config, rng);
  SummaryAccumulator acc(cells, config.keep_quantiles);
  result.fit_rmse.reserve(config.burn_in + config.samples);
  if (options.keep_chain) result.chain.reserve(config.samples);

  Grid3<double> recon(m, n, t_total);
  const int total = config.burn_in + config.samples;
  for (int sweep = 0; sweep < total; ++sweep) {
    try {
      gibbs_step_tensor(state, data, config, priors, rng);
    } catch (const IndefiniteMatrixError& e) {
      throw IndefiniteMatrixError(e.pivot(), "sweep " + std::to_string(sweep) + ": " + e.what());
    }

    double ss = 0.0;
    std::int64_t count = 0;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int t = 0; t < t_total; ++t) {
          const double value = cp_value(state.u, state.v, state.temporal, i, j, t);
          recon(i, j, t) = value;
          if (data.observed(i, j, t)) {
            const double d = data.values(i, j, t) - value;
            ss += d * d;
            ++count;
          }
        }
      }
    }
    result.fit_rmse.push_back(count ? std::sqrt(ss / static_cast<double>(count)) : 0.0);

    if (sweep >= config.burn_in) {
      acc.add({recon.flat().data(), cells});
      if (options.keep_chain) {
        result.chain.push_back({state.u, state.v, state.temporal, state.var_coefs,
                                state.innovation_cov, state.tau});
      }
    }
    if (options.sweep_hook) options.sweep_hook(sweep, state);
  }

  auto reshape = [&](const std::vector<double>& flat) {
    Grid3<double> g(m, n, t_total);
    g.flat() = flat;
    return g;
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
