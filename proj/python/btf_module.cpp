// Apache License, Version 2.0, refer to LICENSE.txt
//
// Python bindings for the main operations: imputation, rolling forecasting,
// masking scenarios and the evaluation metrics. Missing cells travel as NaN.
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "btf/errors.hpp"
#include "btf/bttf.hpp"
#include "btf/forecast.hpp"
#include "btf/masking.hpp"
#include "btf/metrics.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

btf::ModelConfig make_config(int rank, const std::vector<int>& lags, int burn_in, int samples,
                             const std::string& noise, const std::string& dynamics,
                             bool quantiles, int threads, bool tensor) {
  btf::ModelConfig config;
  config.rank = rank;
  config.lags = btf::LagSet(lags);
  config.burn_in = burn_in;
  config.samples = samples;
  config.keep_quantiles = quantiles;
  config.threads = threads;
  if (noise == "per-series") {
    config.noise = btf::NoiseMode::PerSeries;
  } else if (noise == "isotropic") {
    config.noise = btf::NoiseMode::Isotropic;
  } else if (noise == "default") {
    config.noise = tensor ? btf::NoiseMode::Isotropic : btf::NoiseMode::PerSeries;
  } else {
    throw py::value_error("noise must be 'per-series', 'isotropic' or 'default'");
  }
  if (dynamics == "var") {
    config.dynamics = btf::DynamicsMode::FullVar;
  } else if (dynamics == "ar") {
    config.dynamics = btf::DynamicsMode::DiagonalAr;
  } else if (dynamics == "identity") {
    config.dynamics = btf::DynamicsMode::FixedIdentity;
  } else {
    throw py::value_error("dynamics must be 'var', 'ar' or 'identity'");
  }
  return config;
}

btf::SeriesTensor tensor_from_array(const py::array_t<double, py::array::c_style |
                                                                  py::array::forcecast>& arr,
                                    int period) {
  if (arr.ndim() != 3) throw py::value_error("expected a 3-d array (M, N, T)");
  const int m = static_cast<int>(arr.shape(0));
  const int n = static_cast<int>(arr.shape(1));
  const int t = static_cast<int>(arr.shape(2));
  btf::Grid3<double> g(m, n, t);
  const auto view = arr.unchecked<3>();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int s = 0; s < t; ++s) g(i, j, s) = view(i, j, s);
    }
  }
  return btf::SeriesTensor::from_dense(std::move(g), period);
}

py::array_t<double> grid_to_array(const btf::Grid3<double>& g) {
  py::array_t<double> arr({g.dim0(), g.dim1(), g.dim2()});
  auto view = arr.mutable_unchecked<3>();
  for (int i = 0; i < g.dim0(); ++i) {
    for (int j = 0; j < g.dim1(); ++j) {
      for (int t = 0; t < g.dim2(); ++t) view(i, j, t) = g(i, j, t);
    }
  }
  return arr;
}

py::dict impute_matrix(const Eigen::MatrixXd& values, int rank, const std::vector<int>& lags,
                       int burn_in, int samples, std::uint64_t seed, const std::string& noise,
                       const std::string& dynamics, int period, bool quantiles, int threads) {
  const btf::SeriesMatrix series = btf::SeriesMatrix::from_dense(values, period);
  const btf::ModelConfig config =
      make_config(rank, lags, burn_in, samples, noise, dynamics, quantiles, threads, false);
  const btf::HyperPriors priors = btf::HyperPriors::defaults(rank, config.lags.order());
  btf::Rng rng(seed);
  const btf::ImputeResult res = btf::impute(series, config, priors, rng);
  py::dict out;
  out["mean"] = res.summary.mean;
  out["std"] = res.summary.stddev;
  if (quantiles) {
    out["q05"] = res.summary.q05;
    out["q95"] = res.summary.q95;
  }
  out["sample_count"] = res.summary.sample_count;
  out["empty_series"] = res.summary.empty_series;
  out["fit_rmse"] = res.fit_rmse;
  return out;
}

py::dict impute_tensor_array(const py::array_t<double, py::array::c_style |
                                                            py::array::forcecast>& values,
                             int rank, const std::vector<int>& lags, int burn_in, int samples,
                             std::uint64_t seed, const std::string& noise,
                             const std::string& dynamics, int period, bool quantiles,
                             int threads) {
  const btf::SeriesTensor series = tensor_from_array(values, period);
  const btf::ModelConfig config =
      make_config(rank, lags, burn_in, samples, noise, dynamics, quantiles, threads, true);
  const btf::HyperPriors priors = btf::HyperPriors::defaults(rank, config.lags.order());
  btf::Rng rng(seed);
  const btf::TensorImputeResult res = btf::impute_tensor(series, config, priors, rng);
  py::dict out;
  out["mean"] = grid_to_array(res.summary.mean);
  out["std"] = grid_to_array(res.summary.stddev);
  if (quantiles) {
    out["q05"] = grid_to_array(res.summary.q05);
    out["q95"] = grid_to_array(res.summary.q95);
  }
  out["sample_count"] = res.summary.sample_count;
  out["fit_rmse"] = res.fit_rmse;
  return out;
}

py::dict forecast_matrix(const Eigen::MatrixXd& values, int train_steps, int horizon,
                         int windows, int rank, const std::vector<int>& lags, int burn_in,
                         int samples, std::uint64_t seed, int gamma, const std::string& noise,
                         const std::string& dynamics, int period, int threads) {
  const btf::SeriesMatrix series = btf::SeriesMatrix::from_dense(values, period);
  const btf::ModelConfig config =
      make_config(rank, lags, burn_in, samples, noise, dynamics, true, threads, false);
  const btf::HyperPriors priors = btf::HyperPriors::defaults(rank, config.lags.order());
  btf::RollingConfig rolling;
  rolling.horizon = horizon;
  rolling.windows = windows;
  rolling.lookback = gamma;
  rolling.threads = threads;
  btf::Rng rng(seed);
  const btf::ForecastResult res =
      btf::rolling_forecast(series, train_steps, config, priors, rolling, rng);
  py::dict out;
  out["mean"] = res.mean;
  out["std"] = res.stddev;
  out["q05"] = res.q05;
  out["q95"] = res.q95;
  out["retrains"] = res.retrains;
  return out;
}

py::dict mask_matrix(const Eigen::MatrixXd& values, const std::string& scenario, double rate,
                     std::uint64_t seed, int period) {
  const btf::SeriesMatrix series = btf::SeriesMatrix::from_dense(values, period);
  btf::MaskSpec spec;
  if (scenario == "rm") {
    spec.scenario = btf::MissingScenario::Random;
  } else if (scenario == "nm") {
    spec.scenario = btf::MissingScenario::NonRandom;
  } else {
    throw py::value_error("scenario must be 'rm' or 'nm'");
  }
  spec.rate = rate;
  spec.seed = seed;
  const btf::MaskedMatrix res = btf::apply_mask(series, spec);
  Eigen::MatrixXd masked = res.data.values;
  py::array_t<long> held({static_cast<py::ssize_t>(res.held_out.size()), py::ssize_t(2)});
  auto view = held.mutable_unchecked<2>();
  for (py::ssize_t k = 0; k < static_cast<py::ssize_t>(res.held_out.size()); ++k) {
    view(k, 0) = res.held_out[k].i;
    view(k, 1) = res.held_out[k].t;
  }
  py::dict out;
  out["values"] = masked;
  out["held_out"] = held;
  out["warnings"] = res.warnings;
  return out;
}

py::tuple mape_py(const std::vector<double>& actual, const std::vector<double>& estimate) {
  const btf::MapeResult r = btf::mape(actual, estimate);
  return py::make_tuple(r.value, r.excluded_zeros);
}

}  // namespace

PYBIND11_MODULE(_btf, m) {
  m.doc() = "Bayesian temporal matrix/tensor factorization for incomplete time series";

  m.def("impute", &impute_matrix, "values"_a, "rank"_a, "lags"_a, "burn_in"_a = 1000,
        "samples"_a = 200, "seed"_a = 0, "noise"_a = "default", "dynamics"_a = "var",
        "period"_a = 1, "quantiles"_a = true, "threads"_a = 1,
        "Impute a partially observed matrix (NaN = missing); returns posterior summaries.");

  m.def("impute_tensor", &impute_tensor_array, "values"_a, "rank"_a, "lags"_a,
        "burn_in"_a = 1000, "samples"_a = 200, "seed"_a = 0, "noise"_a = "default",
        "dynamics"_a = "var", "period"_a = 1, "quantiles"_a = true, "threads"_a = 1,
        "Impute a partially observed (M, N, T) tensor.");

  m.def("rolling_forecast", &forecast_matrix, "values"_a, "train_steps"_a, "horizon"_a,
        "windows"_a, "rank"_a, "lags"_a, "burn_in"_a = 1000, "samples"_a = 200, "seed"_a = 0,
        "gamma"_a = 10, "noise"_a = "default", "dynamics"_a = "var", "period"_a = 1,
        "threads"_a = 1,
        "Multi-step rolling prediction over the columns after train_steps.");

  m.def("apply_mask", &mask_matrix, "values"_a, "scenario"_a, "rate"_a, "seed"_a = 0,
        "period"_a = 1, "Apply an RM/NM missing-data scenario; returns masked values and index.");

  m.def("mape", &mape_py, "actual"_a, "estimate"_a,
        "Mean absolute percentage error; zero actuals are excluded and counted.");

  m.def("rmse", [](const std::vector<double>& a, const std::vector<double>& e) {
    return btf::rmse(a, e);
  }, "actual"_a, "estimate"_a);

  py::register_exception<btf::IndefiniteMatrixError>(m, "IndefiniteMatrixError");
  py::register_exception<btf::UndefinedMetricError>(m, "UndefinedMetricError");
}
