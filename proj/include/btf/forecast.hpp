// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "btf/btmf.hpp"
#include "btf/bttf.hpp"
#include "btf/model_config.hpp"
#include "btf/series.hpp"

namespace btf {

// Multi-step rolling prediction: forecast `horizon` steps, ingest the next
// (possibly sparse) block, re-draw the last lookback*horizon temporal
// factors against fixed spatial factors, repeat for `windows` rolls.
struct RollingConfig {
  int horizon = 1;    // delta
  int windows = 1;    // S
  int lookback = 10;  // gamma
  int update_passes = 1;
  // Full retrain when a window's realized MAPE exceeds this; 0 disables.
  double retrain_threshold = 0.0;
  // Worker cap for the per-sample replicas; results are identical for any
  // count (each replica owns a derived stream).
  int threads = 1;

  void validate(int train_steps, int total_steps) const;
};

struct ForecastResult {
  std::vector<Eigen::MatrixXd> window_mean;    // S entries, N x horizon
  std::vector<Eigen::MatrixXd> window_stddev;
  std::vector<Eigen::MatrixXd> window_q05;
  std::vector<Eigen::MatrixXd> window_q95;
  Eigen::MatrixXd mean;                        // N x (horizon * S)
  Eigen::MatrixXd stddev, q05, q95;
  std::vector<std::string> warnings;
  int retrains = 0;
};

struct ForecastResultTensor {
  std::vector<Grid3<double>> window_mean;      // M x N x horizon
  std::vector<Grid3<double>> window_stddev;
  std::vector<Grid3<double>> window_q05;
  std::vector<Grid3<double>> window_q95;
  Grid3<double> mean;                          // M x N x (horizon * S)
  Grid3<double> stddev, q05, q95;
  std::vector<std::string> warnings;
  int retrains = 0;
};

// Draws x_{T+1 .. T+horizon} from the fitted dynamics, feeding earlier draws
// into later conditionals. temporal must carry at least max_lag columns.
Eigen::MatrixXd draw_future_factors(const Eigen::MatrixXd& temporal,
                                    const Eigen::MatrixXd& var_coefs,
                                    const SpdMatrix& innovation_cov, const LagSet& lags,
                                    int horizon, Rng& rng);

// Re-draws temporal columns [window_begin, window_end) in ascending order
// against fixed spatial factors and noise. The range is clipped to the
// columns of `temporal`; returns the number of clipped positions.
int update_window_factors(Eigen::MatrixXd& temporal, const SeriesMatrix& stream,
                          const Eigen::MatrixXd& spatial, const Eigen::VectorXd& tau,
                          const Eigen::MatrixXd& var_coefs, const SpdMatrix& innovation_cov,
                          const LagSet& lags, int window_begin, int window_end, int passes,
                          Rng& rng);

// Rolling prediction over a pre-trained chain. `series` holds the training
// columns followed by the (masked) evaluation stream.
ForecastResult rolling_forecast(const SeriesMatrix& series, int train_steps,
                                const std::vector<ChainSample>& chain, const LagSet& lags,
                                const RollingConfig& rolling, Rng& rng);

// Trains on the first train_steps columns, then rolls; supports the
// retrain trigger.
ForecastResult rolling_forecast(const SeriesMatrix& series, int train_steps,
                                const ModelConfig& config, const HyperPriors& priors,
                                const RollingConfig& rolling, Rng& rng);

ForecastResultTensor rolling_forecast_tensor(const SeriesTensor& series, int train_steps,
                                             const ModelConfig& config,
                                             const HyperPriors& priors,
                                             const RollingConfig& rolling, Rng& rng);

}  // namespace btf
