// Apache License, Version 2.0, refer to LICENSE.txt
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "btf/errors.hpp"
#include "btf/forecast.hpp"
#include "btf/masking.hpp"
#include "btf/metrics.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace btf;
using btf::testing::rel_close;

TEST_SUITE("forecast") {

TEST_CASE("noise-free recursion is deterministic") {
  Eigen::MatrixXd x(1, 3);
  x << 0.5, 1.0, 2.0;
  Eigen::MatrixXd a(1, 1);
  a << 0.5;
  SpdMatrix tiny{Eigen::MatrixXd::Constant(1, 1, 1e-30)};
  Rng rng(1);
  const Eigen::MatrixXd future = draw_future_factors(x, a, tiny, LagSet({1}), 2, rng);
  CHECK(future(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(future(0, 1) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("zero coefficients give pure innovation draws") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(1, 2);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Zero(1, 1);
  const SpdMatrix sigma = SpdMatrix::identity(1);
  Rng rng(2);
  double acc = 0.0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) acc += draw_future_factors(x, a, sigma, LagSet({1}), 1, rng)(0, 0);
  CHECK(std::abs(acc / n) < 0.03);
}

TEST_CASE("var(1) one-step empirical mean matches the conditional mean") {
  Eigen::Matrix2d a_mat;
  a_mat << 0.7, 0.2, -0.3, 0.5;
  Eigen::MatrixXd coefs = a_mat.transpose();
  Eigen::MatrixXd x(2, 1);
  x << 1.4, -0.8;
  SpdMatrix sigma{Eigen::MatrixXd(0.15 * 0.15 * Eigen::MatrixXd::Identity(2, 2))};
  Rng rng(3);
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    acc += draw_future_factors(x, coefs, sigma, LagSet({1}), 1, rng).col(0);
  }
  acc /= n;
  const Eigen::Vector2d expected = a_mat * x.col(0);
  CHECK(rel_close(acc(0), expected(0), 0.02));
  CHECK(rel_close(acc(1), expected(1), 0.02));
}

TEST_CASE("short history is rejected") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(1, 2);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 1);
  Rng rng(4);
  CHECK_THROWS_AS(draw_future_factors(x, a, SpdMatrix::identity(1), LagSet({1, 3}), 1, rng),
                  std::invalid_argument);
}

TEST_CASE("window update touches only the requested columns") {
  const auto synth = btf::testing::make_btmf_synthetic(5, 30, 2, LagSet({1}), 0.1, 11);
  Rng rng(12);
  Eigen::MatrixXd temporal = synth.temporal;
  const Eigen::MatrixXd before = temporal;
  Eigen::VectorXd tau = Eigen::VectorXd::Ones(5);
  const int begin = 26, end = 30;  // gamma=1, horizon=4 window
  update_window_factors(temporal, synth.data, synth.spatial, tau, synth.var_coefs,
                        SpdMatrix::identity(2), LagSet({1}), begin, end, 1, rng);
  CHECK(temporal.leftCols(begin) == before.leftCols(begin));
  CHECK(temporal.rightCols(4) != before.rightCols(4));
}

TEST_CASE("fully missing window follows the pure dynamics conditional") {
  // Scalar chain: last column unobserved, so its conditional is N(a x_{t-1}, sigma).
  Eigen::MatrixXd vals(1, 6);
  vals << 1.0, 0.9, 0.8, 0.7, 0.6, std::numeric_limits<double>::quiet_NaN();
  const SeriesMatrix data = SeriesMatrix::from_dense(vals);
  Eigen::MatrixXd a(1, 1);
  a << 0.5;
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(1, 1);
  Eigen::VectorXd tau = Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd base(1, 6);
  base << 1.0, 0.9, 0.8, 0.7, 0.6, 0.0;
  double acc = 0.0, sq = 0.0;
  const int n = 20000;
  Rng rng(13);
  for (int k = 0; k < n; ++k) {
    Eigen::MatrixXd temporal = base;
    update_window_factors(temporal, data, w, tau, a, SpdMatrix::identity(1), LagSet({1}),
                          5, 6, 1, rng);
    acc += temporal(0, 5);
    sq += temporal(0, 5) * temporal(0, 5);
  }
  acc /= n;
  CHECK(rel_close(acc, 0.5 * 0.6, 0.1, 0.02));        // mean = a * x_4
  CHECK(rel_close(sq / n - acc * acc, 1.0, 0.05));    // variance = sigma
}

TEST_CASE("noise-free observed window re-draws the generating factors") {
  // y = w x with a huge precision pins the factor at y / w.
  Eigen::MatrixXd vals(1, 6);
  vals << 2.0, 1.8, 1.6, 1.4, 1.2, 1.0;
  const SeriesMatrix data = SeriesMatrix::from_dense(vals);
  Eigen::MatrixXd a(1, 1);
  a << 0.9;
  Eigen::MatrixXd w(1, 1);
  w << 2.0;
  Eigen::VectorXd tau = Eigen::VectorXd::Constant(1, 1e10);
  Eigen::MatrixXd temporal = Eigen::MatrixXd::Zero(1, 6);
  Rng rng(14);
  update_window_factors(temporal, data, w, tau, a, SpdMatrix::identity(1), LagSet({1}),
                        0, 6, 2, rng);
  for (int t = 0; t < 6; ++t) {
    CHECK(std::abs(temporal(0, t) - vals(0, t) / 2.0) < 1e-3);
  }
}

TEST_CASE("window exceeding history is clipped") {
  Eigen::MatrixXd vals = Eigen::MatrixXd::Ones(2, 8);
  const SeriesMatrix data = SeriesMatrix::from_dense(vals);
  Eigen::MatrixXd temporal = Eigen::MatrixXd::Zero(1, 8);
  Eigen::MatrixXd a(1, 1);
  a << 0.5;
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(1, 2);
  Eigen::VectorXd tau = Eigen::VectorXd::Ones(2);
  Rng rng(15);
  const int clipped = update_window_factors(temporal, data, w, tau, a, SpdMatrix::identity(1),
                                            LagSet({1}), -4, 8, 1, rng);
  CHECK(clipped == 4);
}

namespace {

struct RollingFixture {
  SeriesMatrix series;
  Eigen::MatrixXd truth;
  std::vector<ChainSample> chain;
  ModelConfig config;
  HyperPriors priors = HyperPriors::defaults(1, 1);
  int train = 0;
};

RollingFixture make_fixture(int n, int t_total, int train, int rank, const LagSet& lags,
                            std::uint64_t seed, int m1, int m2) {
  RollingFixture fx;
  const auto synth = btf::testing::make_btmf_synthetic(n, t_total, rank, lags, 0.1, seed);
  fx.series = synth.data;
  fx.truth = synth.data.values;
  fx.train = train;
  fx.config.rank = rank;
  fx.config.lags = lags;
  fx.config.burn_in = m1;
  fx.config.samples = m2;
  fx.priors = HyperPriors::defaults(rank, lags.order());
  ImputeOptions opts;
  opts.keep_chain = true;
  Rng rng(seed + 1);
  fx.chain = impute(fx.series.slice_steps(0, train), fx.config, fx.priors, rng, opts).chain;
  return fx;
}

}  // namespace

TEST_CASE("single window reduces to pure future-factor prediction") {
  RollingFixture fx = make_fixture(6, 60, 50, 2, LagSet({1}), 100, 40, 16);
  RollingConfig rolling;
  rolling.horizon = 5;
  rolling.windows = 1;
  rolling.lookback = 2;
  Rng rng(7);
  const ForecastResult res =
      rolling_forecast(fx.series, fx.train, fx.chain, fx.config.lags, rolling, rng);

  // Emulate the per-sample stream derivation and the pure draws.
  Rng replay(7);
  const std::uint64_t key = replay.next_u64();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(6, 5);
  for (std::size_t l = 0; l < fx.chain.size(); ++l) {
    Rng stream(mix_u64(key ^ mix_u64(static_cast<std::uint64_t>(l))));
    const Eigen::MatrixXd future =
        draw_future_factors(fx.chain[l].temporal, fx.chain[l].var_coefs,
                            SpdMatrix(fx.chain[l].innovation_cov), fx.config.lags, 5, stream);
    acc += fx.chain[l].spatial.transpose() * future;
  }
  acc /= static_cast<double>(fx.chain.size());
  CHECK((res.mean - acc).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("predictions never read past the ingested horizon") {
  RollingFixture fx = make_fixture(5, 80, 60, 2, LagSet({1, 2}), 200, 40, 12);
  RollingConfig rolling;
  rolling.horizon = 4;
  rolling.windows = 5;
  rolling.lookback = 3;

  SeriesMatrix poisoned = fx.series;
  for (int i = 0; i < poisoned.n_series(); ++i) {
    for (int t = 76; t < 80; ++t) poisoned.values(i, t) = 1e6;  // last window block
  }
  Rng rng_a(8), rng_b(8);
  const ForecastResult a =
      rolling_forecast(fx.series, fx.train, fx.chain, fx.config.lags, rolling, rng_a);
  const ForecastResult b =
      rolling_forecast(poisoned, fx.train, fx.chain, fx.config.lags, rolling, rng_b);
  CHECK(a.mean == b.mean);
  CHECK(a.q05 == b.q05);
}

TEST_CASE("spatial factors are bit-identical after any number of windows") {
  RollingFixture fx = make_fixture(5, 80, 60, 2, LagSet({1}), 300, 40, 10);
  std::vector<Eigen::MatrixXd> before;
  for (const auto& sample : fx.chain) before.push_back(sample.spatial);
  RollingConfig rolling;
  rolling.horizon = 2;
  rolling.windows = 8;
  Rng rng(9);
  (void)rolling_forecast(fx.series, fx.train, fx.chain, fx.config.lags, rolling, rng);
  for (std::size_t l = 0; l < fx.chain.size(); ++l) {
    CHECK(fx.chain[l].spatial == before[l]);
  }
}

TEST_CASE("window predictions tile the horizon exactly once") {
  RollingFixture fx = make_fixture(4, 70, 50, 2, LagSet({1}), 400, 30, 8);
  RollingConfig rolling;
  rolling.horizon = 5;
  rolling.windows = 4;
  Rng rng(10);
  const ForecastResult res =
      rolling_forecast(fx.series, fx.train, fx.chain, fx.config.lags, rolling, rng);
  CHECK(res.mean.cols() == 20);
  CHECK(res.window_mean.size() == 4);
  for (int s = 0; s < 4; ++s) {
    CHECK(res.mean.middleCols(5 * s, 5) == res.window_mean[s]);
  }
}

TEST_CASE("exceeding the evaluation range is rejected") {
  RollingFixture fx = make_fixture(4, 60, 50, 2, LagSet({1}), 500, 20, 6);
  RollingConfig rolling;
  rolling.horizon = 6;
  rolling.windows = 2;  // needs 12 columns, only 10 available
  Rng rng(11);
  CHECK_THROWS_AS(
      rolling_forecast(fx.series, fx.train, fx.chain, fx.config.lags, rolling, rng),
      std::invalid_argument);
}

TEST_CASE("one-step rolling beats persistence on most series") {
  const int n = 20, train = 120, horizon = 1, windows = 30;
  RollingFixture fx =
      make_fixture(n, train + windows, train, 3, LagSet({1, 2}), 600, 120, 60);
  RollingConfig rolling;
  rolling.horizon = horizon;
  rolling.windows = windows;
  Rng rng(12);
  const ForecastResult res =
      rolling_forecast(fx.series, fx.train, fx.chain, fx.config.lags, rolling, rng);

  int wins = 0, losses = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> actual, model, persistence;
    for (int s = 0; s < windows; ++s) {
      const int t = train + s;
      actual.push_back(fx.truth(i, t));
      model.push_back(res.mean(i, s));
      persistence.push_back(fx.truth(i, t - 1));  // last observed value
    }
    try {
      const double m = mape(actual, model).value;
      const double p = mape(actual, persistence).value;
      (m < p ? wins : losses) += 1;
    } catch (const UndefinedMetricError&) {
    }
  }
  CHECK(wins + losses == n);
  CHECK(wins >= (n * 11) / 20);  // at least 55% on the quick fixture
}

TEST_CASE("rolling predictions are identical for any thread count") {
  RollingFixture fx = make_fixture(6, 70, 56, 2, LagSet({1}), 950, 30, 12);
  RollingConfig serial;
  serial.horizon = 2;
  serial.windows = 5;
  serial.lookback = 3;
  RollingConfig threaded = serial;
  threaded.threads = 4;
  Rng ra(20), rb(20);
  const ForecastResult a =
      rolling_forecast(fx.series, fx.train, fx.chain, fx.config.lags, serial, ra);
  const ForecastResult b =
      rolling_forecast(fx.series, fx.train, fx.chain, fx.config.lags, threaded, rb);
  CHECK(a.mean == b.mean);
  CHECK(a.stddev == b.stddev);
  CHECK(a.q05 == b.q05);
  CHECK(a.q95 == b.q95);
}

TEST_CASE("multi-scale lag sets run end to end") {
  // Mirrors the daily/weekly protocol shape {1,2,3,T0,T0+1,T0+2,7T0,...} at
  // desk scale with T0 = 12.
  const LagSet lags({1, 2, 3, 12, 13, 14, 84, 85, 86});
  const auto synth = btf::testing::make_btmf_synthetic(6, 240, 2, lags, 0.1, 900);
  ModelConfig config;
  config.rank = 2;
  config.lags = lags;
  config.burn_in = 20;
  config.samples = 8;
  const HyperPriors priors = HyperPriors::defaults(2, lags.order());
  RollingConfig rolling;
  rolling.horizon = 2;
  rolling.windows = 3;
  rolling.lookback = 4;
  Rng rng(901);
  const ForecastResult res = rolling_forecast(synth.data, 230, config, priors, rolling, rng);
  CHECK(res.mean.cols() == 6);
  CHECK(res.mean.allFinite());
}

TEST_CASE("retrain trigger fires on drifting data and is counted") {
  const int n = 5, train = 50, t_total = 74;
  const auto synth = btf::testing::make_btmf_synthetic(n, t_total, 2, LagSet({1}), 0.1, 700);
  SeriesMatrix series = synth.data;
  for (int i = 0; i < n; ++i) {
    for (int t = train; t < t_total; ++t) series.values(i, t) += 25.0;  // regime shift
  }
  ModelConfig config;
  config.rank = 2;
  config.lags = LagSet({1});
  config.burn_in = 30;
  config.samples = 8;
  const HyperPriors priors = HyperPriors::defaults(2, 1);
  RollingConfig rolling;
  rolling.horizon = 4;
  rolling.windows = 6;
  rolling.lookback = 2;
  rolling.retrain_threshold = 30.0;
  Rng rng(13);
  const ForecastResult res = rolling_forecast(series, train, config, priors, rolling, rng);
  CHECK(res.retrains >= 1);
}

TEST_CASE("tensor retrain trigger fires on drifting data") {
  const auto synth = btf::testing::make_bttf_synthetic(4, 4, 52, 2, LagSet({1}), 0.1, 850);
  SeriesTensor series = synth.data;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      for (int t = 40; t < 52; ++t) series.values(i, j, t) += 25.0;
    }
  }
  ModelConfig config;
  config.rank = 2;
  config.lags = LagSet({1});
  config.noise = NoiseMode::Isotropic;
  config.burn_in = 20;
  config.samples = 6;
  const HyperPriors priors = HyperPriors::defaults(2, 1);
  RollingConfig rolling;
  rolling.horizon = 3;
  rolling.windows = 4;
  rolling.lookback = 2;
  rolling.retrain_threshold = 30.0;
  Rng rng(851);
  const ForecastResultTensor res =
      rolling_forecast_tensor(series, 40, config, priors, rolling, rng);
  CHECK(res.retrains >= 1);
}

TEST_CASE("tensor rolling prediction runs and tiles") {
  const auto synth = btf::testing::make_bttf_synthetic(5, 5, 70, 2, LagSet({1}), 0.1, 800);
  ModelConfig config;
  config.rank = 2;
  config.lags = LagSet({1});
  config.noise = NoiseMode::Isotropic;
  config.burn_in = 40;
  config.samples = 10;
  const HyperPriors priors = HyperPriors::defaults(2, 1);
  RollingConfig rolling;
  rolling.horizon = 3;
  rolling.windows = 3;
  rolling.lookback = 2;
  Rng rng(14);
  const ForecastResultTensor res =
      rolling_forecast_tensor(synth.data, 60, config, priors, rolling, rng);
  CHECK(res.mean.dim2() == 9);
  CHECK(res.window_mean.size() == 3);
  // Forecast should track the smooth synthetic signal reasonably well.
  std::vector<double> actual, predicted;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      for (int s = 0; s < 9; ++s) {
        actual.push_back(synth.signal(i, j, 60 + s));
        predicted.push_back(res.mean(i, j, s));
      }
    }
  }
  CHECK(rmse(actual, predicted) < 1.0);
}

}  // TEST_SUITE
