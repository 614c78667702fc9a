// Apache License, Version 2.0, refer to LICENSE.txt
#include "btf/forecast.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>

#include "btf/errors.hpp"
#include "btf/metrics.hpp"
#include "btf/parallel.hpp"

namespace btf {

void RollingConfig::validate(int train_steps, int total_steps) const {
  if (horizon < 1) throw std::invalid_argument("RollingConfig: horizon must be >= 1");
  if (windows < 1) throw std::invalid_argument("RollingConfig: windows must be >= 1");
  if (lookback < 1) throw std::invalid_argument("RollingConfig: lookback must be >= 1");
  if (update_passes < 1) throw std::invalid_argument("RollingConfig: update_passes must be >= 1");
  if (retrain_threshold < 0) throw std::invalid_argument("RollingConfig: retrain threshold must be >= 0");
  if (threads < 1) throw std::invalid_argument("RollingConfig: threads must be >= 1");
  if (lookback * horizon > train_steps) {
    throw std::invalid_argument("RollingConfig: lookback * horizon exceeds the training length");
  }
  if (train_steps + horizon * windows > total_steps) {
    throw std::invalid_argument("RollingConfig: windows * horizon exceeds the evaluation range");
  }
}

Eigen::MatrixXd draw_future_factors(const Eigen::MatrixXd& temporal,
                                    const Eigen::MatrixXd& var_coefs,
                                    const SpdMatrix& innovation_cov, const LagSet& lags,
                                    int horizon, Rng& rng) {
  const int r = static_cast<int>(temporal.rows());
  const int t0 = static_cast<int>(temporal.cols());
  if (t0 < lags.max_lag()) {
    throw std::invalid_argument("draw_future_factors: history shorter than the largest lag");
  }
  if (horizon < 1) throw std::invalid_argument("draw_future_factors: horizon must be >= 1");

  Eigen::MatrixXd work(r, t0 + horizon);
  work.leftCols(t0) = temporal;
  for (int step = 0; step < horizon; ++step) {
    const int t = t0 + step;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(r);
    for (int k = 0; k < lags.order(); ++k) {
      const int block = k * r;
      mean.noalias() +=
          var_coefs.block(block, 0, r, r).transpose() * work.col(t - lags.lag(k));
    }
    work.col(t) = sample_mvn(mean, innovation_cov, MvnParam::Covariance, rng);
  }
  return work.rightCols(horizon);
}

int update_window_factors(Eigen::MatrixXd& temporal, const SeriesMatrix& stream,
                          const Eigen::MatrixXd& spatial, const Eigen::VectorXd& tau,
                          const Eigen::MatrixXd& var_coefs, const SpdMatrix& innovation_cov,
                          const LagSet& lags, int window_begin, int window_end, int passes,
                          Rng& rng) {
  const int t_limit = static_cast<int>(temporal.cols());
  const int begin = std::max(window_begin, 0);
  const int end = std::min(window_end, t_limit);
  const int clipped = (begin - window_begin) + (window_end - end);
  if (stream.n_steps() < end) {
    throw std::invalid_argument("update_window_factors: stream shorter than the window");
  }
  const VarConditional ctx(var_coefs, innovation_cov, lags);
  for (int pass = 0; pass < passes; ++pass) {
    for (int t = begin; t < end; ++t) {
      const ConditionalGaussian cg =
          temporal_conditional(t, stream, spatial, tau, ctx, temporal);
      temporal.col(t) = sample_mvn(cg.mean, cg.precision, MvnParam::Precision, rng);
    }
  }
  return clipped;
}

namespace {

using RetrainFn = std::function<std::vector<ChainSample>(int, Rng&)>;

void tile_windows(const std::vector<Eigen::MatrixXd>& blocks, Eigen::MatrixXd& out) {
  if (blocks.empty()) return;
  const int n = static_cast<int>(blocks[0].rows());
  const int h = static_cast<int>(blocks[0].cols());
  out.resize(n, h * static_cast<int>(blocks.size()));
  for (std::size_t s = 0; s < blocks.size(); ++s) {
    out.middleCols(static_cast<int>(s) * h, h) = blocks[s];
  }
}

ForecastResult drive_matrix(const SeriesMatrix& series, int train_steps,
                            std::vector<ChainSample> chain, const LagSet& lags,
                            const RollingConfig& rolling, Rng& rng, const RetrainFn& retrain) {
  series.validate();
  rolling.validate(train_steps, series.n_steps());
  if (chain.empty()) throw std::invalid_argument("rolling_forecast: chain has no samples");

  const int n = series.n_series();
  const int horizon = rolling.horizon;
  const std::size_t m2 = chain.size();

  std::vector<Eigen::MatrixXd> temporal(m2);
  std::vector<SpdMatrix> sigma;
  sigma.reserve(m2);
  for (std::size_t l = 0; l < m2; ++l) {
    temporal[l] = chain[l].temporal;
    sigma.emplace_back(chain[l].innovation_cov);
  }

  ForecastResult result;
  bool clip_warned = false;
  for (int s = 1; s <= rolling.windows; ++s) {
    const int pred_begin = train_steps + horizon * (s - 1);

    if (s >= 2) {
      bool retrained = false;
      if (retrain && rolling.retrain_threshold > 0.0) {
        // Realized error of the previous window over its now-ingested cells.
        std::vector<double> actual, estimate;
        for (int i = 0; i < n; ++i) {
          for (int c = 0; c < horizon; ++c) {
            const int t = pred_begin - horizon + c;
            if (!series.observed(i, t)) continue;
            actual.push_back(series.values(i, t));
            estimate.push_back(result.window_mean[s - 2](i, c));
          }
        }
        try {
          if (mape(actual, estimate).value > rolling.retrain_threshold) {
            chain = retrain(pred_begin, rng);
            if (chain.size() != m2) {
              throw std::logic_error("rolling_forecast: retrain changed the sample count");
            }
            sigma.clear();
            for (std::size_t l = 0; l < m2; ++l) {
              temporal[l] = chain[l].temporal;
              sigma.emplace_back(chain[l].innovation_cov);
            }
            ++result.retrains;
            retrained = true;
          }
        } catch (const UndefinedMetricError&) {
        }
      }
      if (!retrained) {
        const int win_begin = pred_begin - rolling.lookback * horizon;
        std::atomic<bool> clipped_any{false};
        parallel_for_indexed(static_cast<int>(m2), rolling.threads, rng, [&](int l, Rng& stream) {
          const int clipped = update_window_factors(
              temporal[l], series, chain[l].spatial, chain[l].tau, chain[l].var_coefs,
              sigma[l], lags, win_begin, pred_begin, rolling.update_passes, stream);
          if (clipped > 0) clipped_any.store(true);
        });
        if (clipped_any.load() && !clip_warned) {
          result.warnings.push_back("update window clipped to available history");
          clip_warned = true;
        }
      }
    }

    SummaryAccumulator acc(static_cast<std::size_t>(n) * horizon, true);
    std::vector<Eigen::MatrixXd> preds(m2);
    parallel_for_indexed(static_cast<int>(m2), rolling.threads, rng, [&](int l, Rng& stream) {
      const Eigen::MatrixXd future = draw_future_factors(
          temporal[l], chain[l].var_coefs, sigma[l], lags, horizon, stream);
      Eigen::MatrixXd grown(temporal[l].rows(), temporal[l].cols() + horizon);
      grown << temporal[l], future;
      temporal[l] = std::move(grown);
      preds[l] = chain[l].spatial.transpose() * future;
    });
    for (std::size_t l = 0; l < m2; ++l) {
      acc.add({preds[l].data(), static_cast<std::size_t>(preds[l].size())});
    }
    auto reshape = [&](const std::vector<double>& flat) {
      return Eigen::Map<const Eigen::MatrixXd>(flat.data(), n, horizon).eval();
    };
    result.window_mean.push_back(reshape(acc.mean()));
    result.window_stddev.push_back(reshape(acc.stddev()));
    result.window_q05.push_back(reshape(acc.quantile(0.05)));
    result.window_q95.push_back(reshape(acc.quantile(0.95)));
  }

  tile_windows(result.window_mean, result.mean);
  tile_windows(result.window_stddev, result.stddev);
  tile_windows(result.window_q05, result.q05);
  tile_windows(result.window_q95, result.q95);
  return result;
}

}  // namespace

ForecastResult rolling_forecast(const SeriesMatrix& series, int train_steps,
                                const std::vector<ChainSample>& chain, const LagSet& lags,
                                const RollingConfig& rolling, Rng& rng) {
  return drive_matrix(series, train_steps, chain, lags, rolling, rng, nullptr);
}

ForecastResult rolling_forecast(const SeriesMatrix& series, int train_steps,
                                const ModelConfig& config, const HyperPriors& priors,
                                const RollingConfig& rolling, Rng& rng) {
  series.validate();
  rolling.validate(train_steps, series.n_steps());
  ImputeOptions options;
  options.keep_chain = true;
  ImputeResult trained = impute(series.slice_steps(0, train_steps), config, priors, rng, options);
  RetrainFn retrain;
  if (rolling.retrain_threshold > 0.0) {
    retrain = [&](int t_now, Rng& r) {
      ImputeResult again = impute(series.slice_steps(0, t_now), config, priors, r, options);
      return std::move(again.chain);
    };
  }
  return drive_matrix(series, train_steps, std::move(trained.chain), config.lags, rolling, rng,
                      retrain);
}

namespace {

int update_window_factors_cp(Eigen::MatrixXd& temporal, const SeriesTensor& stream,
                             const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                             const Eigen::MatrixXd& tau, const Eigen::MatrixXd& var_coefs,
                             const SpdMatrix& innovation_cov, const LagSet& lags,
                             int window_begin, int window_end, int passes, Rng& rng) {
  const int t_limit = static_cast<int>(temporal.cols());
  const int begin = std::max(window_begin, 0);
  const int end = std::min(window_end, t_limit);
  const VarConditional ctx(var_coefs, innovation_cov, lags);
  for (int pass = 0; pass < passes; ++pass) {
    for (int t = begin; t < end; ++t) {
      const ConditionalGaussian cg =
          temporal_conditional_cp(t, stream, u, v, tau, ctx, temporal);
      temporal.col(t) = sample_mvn(cg.mean, cg.precision, MvnParam::Precision, rng);
    }
  }
  return (begin - window_begin) + (window_end - end);
}

}  // namespace

ForecastResultTensor rolling_forecast_tensor(const SeriesTensor& series, int train_steps,
                                             const ModelConfig& config,
                                             const HyperPriors& priors,
                                             const RollingConfig& rolling, Rng& rng) {
  series.validate();
  rolling.validate(train_steps, series.n_steps());

  TensorImputeOptions options;
  options.keep_chain = true;
  TensorImputeResult trained =
      impute_tensor(series.slice_steps(0, train_steps), config, priors, rng, options);
  std::vector<ChainSampleCp> chain = std::move(trained.chain);

  const int m = series.dim0();
  const int n = series.dim1();
  const int horizon = rolling.horizon;
  const std::size_t m2 = chain.size();
  const std::size_t block_cells = static_cast<std::size_t>(m) * n * horizon;

  std::vector<Eigen::MatrixXd> temporal(m2);
  std::vector<SpdMatrix> sigma;
  sigma.reserve(m2);
  for (std::size_t l = 0; l < m2; ++l) {
    temporal[l] = chain[l].temporal;
    sigma.emplace_back(chain[l].innovation_cov);
  }

  ForecastResultTensor result;
  bool clip_warned = false;
  for (int s = 1; s <= rolling.windows; ++s) {
    const int pred_begin = train_steps + horizon * (s - 1);

    if (s >= 2) {
      bool retrained = false;
      if (rolling.retrain_threshold > 0.0) {
        std::vector<double> actual, estimate;
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            for (int c = 0; c < horizon; ++c) {
              const int t = pred_begin - horizon + c;
              if (!series.observed(i, j, t)) continue;
              actual.push_back(series.values(i, j, t));
              estimate.push_back(result.window_mean[s - 2](i, j, c));
            }
          }
        }
        try {
          if (mape(actual, estimate).value > rolling.retrain_threshold) {
            TensorImputeResult again =
                impute_tensor(series.slice_steps(0, pred_begin), config, priors, rng, options);
            chain = std::move(again.chain);
            sigma.clear();
            for (std::size_t l = 0; l < m2; ++l) {
              temporal[l] = chain[l].temporal;
              sigma.emplace_back(chain[l].innovation_cov);
            }
            ++result.retrains;
            retrained = true;
          }
        } catch (const UndefinedMetricError&) {
        }
      }
      if (!retrained) {
        const int win_begin = pred_begin - rolling.lookback * horizon;
        std::atomic<bool> clipped_any{false};
        parallel_for_indexed(static_cast<int>(m2), rolling.threads, rng, [&](int l, Rng& stream) {
          const int clipped = update_window_factors_cp(
              temporal[l], series, chain[l].u, chain[l].v, chain[l].tau, chain[l].var_coefs,
              sigma[l], config.lags, win_begin, pred_begin, rolling.update_passes, stream);
          if (clipped > 0) clipped_any.store(true);
        });
        if (clipped_any.load() && !clip_warned) {
          result.warnings.push_back("update window clipped to available history");
          clip_warned = true;
        }
      }
    }

    SummaryAccumulator acc(block_cells, true);
    std::vector<Grid3<double>> preds(m2);
    parallel_for_indexed(static_cast<int>(m2), rolling.threads, rng, [&](int l, Rng& stream) {
      const Eigen::MatrixXd future = draw_future_factors(
          temporal[l], chain[l].var_coefs, sigma[l], config.lags, horizon, stream);
      Eigen::MatrixXd grown(temporal[l].rows(), temporal[l].cols() + horizon);
      grown << temporal[l], future;
      temporal[l] = std::move(grown);
      Grid3<double> pred(m, n, horizon);
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          for (int c = 0; c < horizon; ++c) {
            pred(i, j, c) =
                (chain[l].u.col(i).array() * chain[l].v.col(j).array() * future.col(c).array())
                    .sum();
          }
        }
      }
      preds[l] = std::move(pred);
    });
    for (std::size_t l = 0; l < m2; ++l) acc.add({preds[l].flat().data(), block_cells});
    auto reshape = [&](const std::vector<double>& flat) {
      Grid3<double> g(m, n, horizon);
      g.flat() = flat;
      return g;
    };
    result.window_mean.push_back(reshape(acc.mean()));
    result.window_stddev.push_back(reshape(acc.stddev()));
    result.window_q05.push_back(reshape(acc.quantile(0.05)));
    result.window_q95.push_back(reshape(acc.quantile(0.95)));
  }

  auto tile = [&](const std::vector<Grid3<double>>& blocks) {
    Grid3<double> out(m, n, horizon * rolling.windows);
    for (int s = 0; s < static_cast<int>(blocks.size()); ++s) {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          for (int c = 0; c < horizon; ++c) out(i, j, s * horizon + c) = blocks[s](i, j, c);
        }
      }
    }
    return out;
  };
  result.mean = tile(result.window_mean);
  result.stddev = tile(result.window_stddev);
  result.q05 = tile(result.window_q05);
  result.q95 = tile(result.window_q95);
  return result;
}

}  // namespace btf
