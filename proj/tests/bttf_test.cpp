// Apache License, Version 2.0, refer to LICENSE.txt
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "btf/bttf.hpp"
#include "btf/masking.hpp"
#include "btf/metrics.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace btf;
using btf::testing::grid_moments2;
using btf::testing::log_normal_pdf;
using btf::testing::rel_close;

namespace {

SeriesTensor single_cell_tensor(double value) {
  Grid3<double> g(1, 1, 1);
  g(0, 0, 0) = value;
  return SeriesTensor::from_dense(std::move(g));
}

SeriesTensor lift(const SeriesMatrix& m) {
  Grid3<double> g(m.n_series(), 1, m.n_steps(), std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < m.n_series(); ++i) {
    for (int t = 0; t < m.n_steps(); ++t) {
      if (m.observed(i, t)) g(i, 0, t) = m.values(i, t);
    }
  }
  return SeriesTensor::from_dense(std::move(g), m.period);
}

}  // namespace

TEST_SUITE("bttf") {

TEST_CASE("mode factor update, fully missing slab returns the prior exactly") {
  Grid3<double> g(2, 2, 2, std::numeric_limits<double>::quiet_NaN());
  g(1, 0, 0) = 1.0;
  const SeriesTensor data = SeriesTensor::from_dense(std::move(g));
  const Eigen::MatrixXd u = Eigen::MatrixXd::Ones(2, 2);
  const Eigen::MatrixXd v = Eigen::MatrixXd::Ones(2, 2);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(2, 2);
  const Eigen::MatrixXd tau = Eigen::MatrixXd::Ones(1, 1);
  Eigen::VectorXd mu(2);
  mu << 0.4, -0.6;
  Eigen::MatrixXd lm(2, 2);
  lm << 2, 0.3, 0.3, 1;
  const ConditionalGaussian post =
      posterior_mode_factor(CpMode::U, 0, data, u, v, x, tau, mu, SpdMatrix(lm));
  CHECK(post.mean == mu);
  CHECK(post.precision.matrix() == SpdMatrix(lm).matrix());
}

TEST_CASE("mode factor update scalar example") {
  const SeriesTensor data = single_cell_tensor(6.0);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(1, 1);
  Eigen::MatrixXd v(1, 1);
  v << 2.0;
  Eigen::MatrixXd x(1, 1);
  x << 1.0;
  const Eigen::MatrixXd tau = Eigen::MatrixXd::Ones(1, 1);
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(1);
  const SpdMatrix lambda = SpdMatrix::identity(1);
  const ConditionalGaussian post =
      posterior_mode_factor(CpMode::U, 0, data, u, v, x, tau, mu, lambda);
  CHECK(post.precision.matrix()(0, 0) == doctest::Approx(5.0));
  CHECK(post.mean(0) == doctest::Approx(12.0 / 5.0));
}

TEST_CASE("mode factor conditional matches grid quadrature, R=2") {
  Grid3<double> g(1, 2, 2, std::numeric_limits<double>::quiet_NaN());
  g(0, 0, 0) = 1.1;
  g(0, 1, 1) = -0.7;
  g(0, 0, 1) = 0.4;
  const SeriesTensor data = SeriesTensor::from_dense(std::move(g));
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(2, 1);
  Eigen::MatrixXd v(2, 2);
  v << 0.8, -0.5, 0.3, 1.2;
  Eigen::MatrixXd x(2, 2);
  x << 1.0, 0.2, -0.4, 0.9;
  Eigen::MatrixXd tau(1, 2);
  tau.setZero();
  // per-pair tau needs dim0 x dim1 = 1 x 2
  tau << 1.4, 0.6;
  Eigen::Vector2d mu(0.1, 0.2);
  Eigen::Matrix2d lm;
  lm << 1.5, 0.2, 0.2, 0.9;
  const ConditionalGaussian post =
      posterior_mode_factor(CpMode::U, 0, data, u, v, x, tau, mu, SpdMatrix(lm));

  auto logdens = [&](double a, double b) {
    const Eigen::Vector2d uvec(a, b);
    const Eigen::Vector2d d = uvec - mu;
    double l = -0.5 * d.dot(lm * d);
    for (int j = 0; j < 2; ++j) {
      for (int t = 0; t < 2; ++t) {
        if (!data.observed(0, j, t)) continue;
        const Eigen::Vector2d w = (v.col(j).array() * x.col(t).array()).matrix();
        l += log_normal_pdf(data.values(0, j, t), uvec.dot(w), 1.0 / tau(0, j));
      }
    }
    return l;
  };
  const auto mom = grid_moments2(logdens, -4, 4, -4, 4, 601);
  const Eigen::MatrixXd cov = post.covariance();
  CHECK(rel_close(post.mean(0), mom.mean(0), 0.05, 0.02));
  CHECK(rel_close(post.mean(1), mom.mean(1), 0.05, 0.02));
  CHECK(rel_close(cov(0, 0), mom.cov(0, 0), 0.05));
  CHECK(rel_close(cov(1, 1), mom.cov(1, 1), 0.05));
}

TEST_CASE("single-column tensor reduces exactly to the matrix model") {
  const auto synth = btf::testing::make_btmf_synthetic(5, 24, 3, LagSet({1, 2}), 0.1, 88);
  const MaskedMatrix masked = apply_mask(synth.data, {MissingScenario::Random, 0.3, 2});
  const SeriesTensor tensor = lift(masked.data);
  const SeriesMatrix& matrix = masked.data;

  Rng rng(5);
  const Eigen::MatrixXd u = btf::testing::random_matrix(3, 5, rng);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(3, 1);
  const Eigen::MatrixXd x = btf::testing::random_matrix(3, 24, rng);
  Eigen::VectorXd tau_rows(5);
  for (int i = 0; i < 5; ++i) tau_rows(i) = 0.4 + 0.3 * i;
  Eigen::MatrixXd tau_field(5, 1);
  tau_field.col(0) = tau_rows;
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(3);
  const SpdMatrix lambda = SpdMatrix::identity(3);

  // Mode-U conditionals equal the spatial-factor conditionals.
  for (int i = 0; i < 5; ++i) {
    const ConditionalGaussian a =
        posterior_mode_factor(CpMode::U, i, tensor, u, ones, x, tau_field, mu, lambda);
    const ConditionalGaussian b =
        posterior_spatial_factor(i, matrix, x, tau_rows(i), mu, lambda);
    CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((a.precision.matrix() - b.precision.matrix()).cwiseAbs().maxCoeff() <= 1e-10);
  }

  // Temporal conditionals coincide as well.
  Eigen::MatrixXd var_coefs = btf::testing::stable_var_coefs(3, LagSet({1, 2}), rng);
  Eigen::MatrixXd sigma(3, 3);
  sigma << 1.0, 0.2, 0.0, 0.2, 0.8, 0.1, 0.0, 0.1, 0.6;
  for (int t : {0, 1, 10, 23}) {
    const ConditionalGaussian a = posterior_temporal_factor_cp(
        t, tensor, u, ones, tau_field, var_coefs, SpdMatrix(sigma), LagSet({1, 2}), x);
    const ConditionalGaussian b = posterior_temporal_factor(
        t, matrix, u, tau_rows, var_coefs, SpdMatrix(sigma), LagSet({1, 2}), x);
    CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((a.precision.matrix() - b.precision.matrix()).cwiseAbs().maxCoeff() <= 1e-10);
  }

  // Pooled precision agrees with the matrix pooled update.
  const HyperPriors priors = HyperPriors::defaults(3, 2);
  const GammaPosterior ga = posterior_precision_cp_pooled(tensor, u, ones, x, priors);
  const GammaPosterior gb = posterior_precision_pooled(matrix, u, x, priors);
  CHECK(ga.shape == doctest::Approx(gb.shape));
  CHECK(ga.rate == doctest::Approx(gb.rate));
}

TEST_CASE("temporal conditional with empty slice before any lag gives the standard prior") {
  Grid3<double> g(2, 2, 1, std::numeric_limits<double>::quiet_NaN());
  SeriesTensor data;
  data.values = std::move(g);
  data.mask = Grid3<std::uint8_t>(2, 2, 1, 0);
  data.period = 1;
  const Eigen::MatrixXd u = Eigen::MatrixXd::Ones(2, 2);
  const Eigen::MatrixXd v = Eigen::MatrixXd::Ones(2, 2);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  const Eigen::MatrixXd tau = Eigen::MatrixXd::Ones(1, 1);
  const ConditionalGaussian post = posterior_temporal_factor_cp(
      0, data, u, v, tau, a, SpdMatrix::identity(2), LagSet({1}), x);
  CHECK(post.mean == Eigen::VectorXd::Zero(2));
  CHECK(post.precision.matrix() == Eigen::MatrixXd::Identity(2, 2));
}

TEST_CASE("scalar temporal example mirrors the matrix case with w = u * v") {
  Grid3<double> g(1, 1, 2, std::numeric_limits<double>::quiet_NaN());
  g(0, 0, 1) = 3.0;
  const SeriesTensor data = SeriesTensor::from_dense(std::move(g));
  Eigen::MatrixXd u(1, 1), v(1, 1);
  u << 2.0;
  v << 0.5;  // w = u * v = 1, matching the matrix example
  Eigen::MatrixXd a(1, 1);
  a << 0.5;
  Eigen::MatrixXd x(1, 2);
  x << 2.0, 0.0;
  const Eigen::MatrixXd tau = Eigen::MatrixXd::Ones(1, 1);
  const ConditionalGaussian post = posterior_temporal_factor_cp(
      1, data, u, v, tau, a, SpdMatrix::identity(1), LagSet({1}), x);
  CHECK(post.covariance()(0, 0) == doctest::Approx(0.5));
  CHECK(post.mean(0) == doctest::Approx(2.0));
}

TEST_CASE("mode symmetry: swapping modes and transposing slices") {
  Rng rng(7);
  Grid3<double> g(3, 4, 5, std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      for (int t = 0; t < 5; ++t) {
        if (rng.uniform() < 0.6) g(i, j, t) = rng.normal();
      }
    }
  }
  const SeriesTensor data = SeriesTensor::from_dense(std::move(g));
  Grid3<double> swapped_vals(4, 3, 5, std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      for (int t = 0; t < 5; ++t) {
        if (data.observed(i, j, t)) swapped_vals(j, i, t) = data.values(i, j, t);
      }
    }
  }
  const SeriesTensor swapped = SeriesTensor::from_dense(std::move(swapped_vals));

  const Eigen::MatrixXd u = btf::testing::random_matrix(2, 3, rng);
  const Eigen::MatrixXd v = btf::testing::random_matrix(2, 4, rng);
  const Eigen::MatrixXd x = btf::testing::random_matrix(2, 5, rng);
  Eigen::MatrixXd tau(3, 4);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) tau(i, j) = 0.3 + 0.1 * (i + 2 * j);
  }
  const Eigen::MatrixXd tau_t = tau.transpose();
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
  const SpdMatrix lambda = SpdMatrix::identity(2);

  for (int i = 0; i < 3; ++i) {
    const ConditionalGaussian a =
        posterior_mode_factor(CpMode::U, i, data, u, v, x, tau, mu, lambda);
    const ConditionalGaussian b =
        posterior_mode_factor(CpMode::V, i, swapped, v, u, x, tau_t, mu, lambda);
    CHECK(a.mean == b.mean);
    CHECK(a.precision.matrix() == b.precision.matrix());
  }
}

TEST_CASE("precision updates: prior fallback and arithmetic") {
  const HyperPriors priors = HyperPriors::defaults(1, 1);
  Grid3<double> g(1, 1, 1, std::numeric_limits<double>::quiet_NaN());
  const SeriesTensor empty = SeriesTensor::from_dense(std::move(g));
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(1, 1);
  const GammaPosterior back = posterior_precision_cp_pooled(empty, z, z, z, priors);
  CHECK(back.shape == priors.gamma_shape);
  CHECK(back.rate == priors.gamma_rate);

  // One observation with residual 2.
  const SeriesTensor one = single_cell_tensor(2.0);
  const GammaPosterior post = posterior_precision_cp_pooled(one, z, z, z, priors);
  CHECK(post.shape == doctest::Approx(priors.gamma_shape + 0.5));
  CHECK(post.rate == doctest::Approx(priors.gamma_rate + 2.0));
}

TEST_CASE("pooled and per-fiber precision agree on a single-fiber tensor") {
  Grid3<double> g(1, 1, 4);
  g(0, 0, 0) = 1.0;
  g(0, 0, 1) = -0.5;
  g(0, 0, 2) = 2.0;
  g(0, 0, 3) = 0.25;
  const SeriesTensor data = SeriesTensor::from_dense(std::move(g));
  Rng rng(11);
  const Eigen::MatrixXd u = btf::testing::random_matrix(2, 1, rng);
  const Eigen::MatrixXd v = btf::testing::random_matrix(2, 1, rng);
  const Eigen::MatrixXd x = btf::testing::random_matrix(2, 4, rng);
  const HyperPriors priors = HyperPriors::defaults(2, 1);
  const GammaPosterior pooled = posterior_precision_cp_pooled(data, u, v, x, priors);
  const GammaPosterior fiber = posterior_precision_cp_fiber(0, 0, data, u, v, x, priors);
  CHECK(pooled.shape == doctest::Approx(fiber.shape));
  CHECK(pooled.rate == doctest::Approx(fiber.rate));
}

TEST_CASE("sparse fibers fall back to the pooled precision draw") {
  Grid3<double> g(2, 2, 6, std::numeric_limits<double>::quiet_NaN());
  for (int t = 0; t < 6; ++t) g(0, 0, t) = 1.0 + 0.1 * t;  // dense fiber
  g(0, 1, 0) = 2.0;  // the remaining fibers hold fewer than three cells
  g(1, 0, 3) = 1.0;
  g(1, 1, 2) = -0.5;
  g(1, 1, 5) = 0.25;
  const SeriesTensor data = SeriesTensor::from_dense(std::move(g));
  ModelConfig config;
  config.rank = 2;
  config.lags = LagSet({1});
  config.noise = NoiseMode::PerSeries;
  const HyperPriors priors = HyperPriors::defaults(2, 1);
  Rng init(3);
  BttfState state = BttfState::initial(data, config, init);
  Rng rng(4);
  gibbs_step_tensor(state, data, config, priors, rng);
  gibbs_step_tensor(state, data, config, priors, rng);
  // Every sparse fiber carries the one pooled draw; the dense fiber has its
  // own, which almost surely differs.
  CHECK(state.tau(0, 1) == state.tau(1, 0));
  CHECK(state.tau(0, 1) == state.tau(1, 1));
  CHECK(state.tau(0, 0) != state.tau(0, 1));
  CHECK(state.tau(0, 1) > 0.0);
}

TEST_CASE("frozen mode-v factors are untouched by the sweep") {
  const auto synth = btf::testing::make_bttf_synthetic(4, 3, 20, 2, LagSet({1}), 0.1, 21);
  ModelConfig config;
  config.rank = 2;
  config.lags = LagSet({1});
  config.noise = NoiseMode::Isotropic;
  const HyperPriors priors = HyperPriors::defaults(2, 1);
  Rng init(5);
  BttfState state = BttfState::initial(synth.data, config, init);
  const Eigen::MatrixXd v_before = state.v;
  Rng rng(6);
  gibbs_step_tensor(state, synth.data, config, priors, rng, /*freeze_v=*/true);
  CHECK(state.v == v_before);
}

TEST_CASE("tensor sweep is deterministic") {
  const auto synth = btf::testing::make_bttf_synthetic(4, 4, 16, 2, LagSet({1}), 0.1, 31);
  ModelConfig config;
  config.rank = 2;
  config.lags = LagSet({1});
  config.noise = NoiseMode::PerSeries;
  const HyperPriors priors = HyperPriors::defaults(2, 1);
  Rng ia(1), ib(1);
  BttfState sa = BttfState::initial(synth.data, config, ia);
  BttfState sb = BttfState::initial(synth.data, config, ib);
  Rng ra(2), rb(2);
  for (int k = 0; k < 2; ++k) {
    gibbs_step_tensor(sa, synth.data, config, priors, ra);
    gibbs_step_tensor(sb, synth.data, config, priors, rb);
  }
  CHECK(sa.u == sb.u);
  CHECK(sa.v == sb.v);
  CHECK(sa.temporal == sb.temporal);
  CHECK(sa.tau == sb.tau);
}

TEST_CASE("tensor imputation recovers held-out cells") {
  const auto synth = btf::testing::make_bttf_synthetic(8, 8, 120, 3, LagSet({1, 2}), 0.1, 41);
  const MaskedTensor masked = apply_mask(synth.data, {MissingScenario::Random, 0.3, 42});
  ModelConfig config;
  config.rank = 3;
  config.lags = LagSet({1, 2});
  config.noise = NoiseMode::Isotropic;
  config.burn_in = 150;
  config.samples = 60;
  const HyperPriors priors = HyperPriors::defaults(3, 2);
  Rng rng(43);
  const TensorImputeResult res = impute_tensor(masked.data, config, priors, rng);
  const auto actual = gather(synth.data.values, masked.held_out);
  const auto estimate = gather(res.summary.mean, masked.held_out);
  CHECK(rmse(actual, estimate) < 0.2);
}

TEST_CASE("random-walk configuration runs and recovers") {
  const auto synth = btf::testing::make_bttf_synthetic(8, 8, 100, 3, LagSet({1}), 0.1, 51);
  const MaskedTensor masked = apply_mask(synth.data, {MissingScenario::Random, 0.3, 52});
  ModelConfig config;
  config.rank = 3;
  config.lags = LagSet({1});
  config.dynamics = DynamicsMode::FixedIdentity;
  config.noise = NoiseMode::Isotropic;
  config.burn_in = 150;
  config.samples = 60;
  const HyperPriors priors = HyperPriors::defaults(3, 1);
  Rng rng(53);
  const TensorImputeResult res = impute_tensor(masked.data, config, priors, rng);
  const auto actual = gather(synth.data.values, masked.held_out);
  const auto estimate = gather(res.summary.mean, masked.held_out);
  CHECK(rmse(actual, estimate) < 0.25);
}

TEST_CASE("degenerate single-slice tensors are accepted") {
  const auto synth = btf::testing::make_bttf_synthetic(1, 5, 30, 2, LagSet({1}), 0.1, 61);
  ModelConfig config;
  config.rank = 2;
  config.lags = LagSet({1});
  config.noise = NoiseMode::Isotropic;
  config.burn_in = 10;
  config.samples = 5;
  const HyperPriors priors = HyperPriors::defaults(2, 1);
  Rng rng(62);
  const TensorImputeResult res = impute_tensor(synth.data, config, priors, rng);
  CHECK(res.summary.mean.dim0() == 1);
  CHECK(res.summary.sample_count == 5);
}

}  // TEST_SUITE
