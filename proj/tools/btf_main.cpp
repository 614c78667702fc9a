// Apache License, Version 2.0, refer to LICENSE.txt
//
// Command-line front-end: mask / impute / forecast / eval subcommands over
// the CSV formats described in the README. Every run that produces model
// output also writes a manifest of key=value pairs which can be fed back
// through --config to reproduce the run bit-exactly.
#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "btf/bttf.hpp"
#include "btf/csv_io.hpp"
#include "btf/errors.hpp"
#include "btf/forecast.hpp"
#include "btf/masking.hpp"
#include "btf/metrics.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

struct DataOptions {
  std::string input;
  std::string format = "matrix";
  std::string dims;  // "M,N,T" for tensor-long when inference is unwanted
  int period = 1;
};

struct ModelOptions {
  int rank = 0;       // 0 resolves to the conventional defaults below
  std::string lags;   // empty resolves to 1,2,T0
  int burn_in = 1000;
  int samples = 200;
  std::uint64_t seed = 0;
  std::string noise;  // defaults depend on matrix vs tensor input
  std::string dynamics = "var";
  int threads = 1;
  bool no_quantiles = false;

  // Conventional defaults: rank 10 for matrices, 30 for tensors, and the
  // small daily lag set {1, 2, T0}.
  void resolve(bool tensor, int period) {
    if (rank == 0) rank = tensor ? 30 : 10;
    if (lags.empty()) {
      lags = period > 2 ? "1,2," + std::to_string(period) : "1,2";
    }
  }
};

std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw btf::ParseError("cannot open config '" + path + "'");
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string text = strip(line);
    if (text.empty() || text[0] == '#' || text[0] == '[') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw btf::ParseError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    pairs.emplace_back(strip(text.substr(0, eq)), strip(text.substr(eq + 1)));
  }
  return pairs;
}

// key=value config merged under the command line, flags winning.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string config;
  std::vector<std::string> out;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) {
      config = args[++k];
      continue;
    }
    if (args[k].rfind("--config=", 0) == 0) {
      config = args[k].substr(9);
      continue;
    }
    out.push_back(args[k]);
  }
  if (config.empty()) return out;
  std::set<std::string> given;
  for (const auto& a : out) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(0, a.find('=')));
  }
  for (const auto& [key, value] : read_config_file(config)) {
    const std::string flag = "--" + key;
    if (given.count(flag)) continue;
    if (value == "true") {
      out.push_back(flag);
    } else if (value != "false") {
      out.push_back(flag + "=" + value);
    }
  }
  return out;
}

std::vector<int> parse_lags(const std::string& text) {
  std::vector<int> lags;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    lags.push_back(std::stoi(token));
  }
  if (lags.empty()) throw CLI::ValidationError("--lags", "needs at least one lag");
  return lags;
}

std::optional<btf::TensorDims> parse_dims(const std::string& text) {
  if (text.empty()) return std::nullopt;
  btf::TensorDims dims;
  if (std::sscanf(text.c_str(), "%d,%d,%d", &dims.m, &dims.n, &dims.t) != 3) {
    throw CLI::ValidationError("--dims", "expected M,N,T");
  }
  return dims;
}

btf::NoiseMode parse_noise(const std::string& text, btf::NoiseMode fallback) {
  if (text.empty()) return fallback;
  if (text == "per-series") return btf::NoiseMode::PerSeries;
  if (text == "isotropic") return btf::NoiseMode::Isotropic;
  throw CLI::ValidationError("--noise", "expected per-series or isotropic");
}

btf::DynamicsMode parse_dynamics(const std::string& text) {
  if (text == "var") return btf::DynamicsMode::FullVar;
  if (text == "ar") return btf::DynamicsMode::DiagonalAr;
  if (text == "identity") return btf::DynamicsMode::FixedIdentity;
  throw CLI::ValidationError("--dynamics", "expected var, ar or identity");
}

void add_data_options(CLI::App* cmd, DataOptions& data) {
  cmd->add_option("--input", data.input, "input series file")->required();
  cmd->add_option("--format", data.format, "matrix | tensor-long")
      ->check(CLI::IsMember({"matrix", "tensor-long"}));
  cmd->add_option("--dims", data.dims, "tensor dims as M,N,T (otherwise inferred)");
  cmd->add_option("--t0", data.period, "time slots per day")->check(CLI::PositiveNumber);
}

void add_model_options(CLI::App* cmd, ModelOptions& model) {
  cmd->add_option("--rank", model.rank, "low rank R (default 10 matrix / 30 tensor)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--lags", model.lags, "comma-separated lag set (default 1,2,T0)");
  cmd->add_option("--burn-in", model.burn_in, "burn-in sweeps m1")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--samples", model.samples, "retained sweeps m2")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", model.seed, "random seed");
  cmd->add_option("--noise", model.noise,
                  "per-series | isotropic (default per-series for matrices, isotropic for tensors)");
  cmd->add_option("--dynamics", model.dynamics, "var | ar | identity");
  cmd->add_option("--threads", model.threads, "worker thread cap")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-quantiles", model.no_quantiles,
                "skip per-sample retention and quantile output");
}

btf::ModelConfig build_config(const ModelOptions& model, bool tensor) {
  btf::ModelConfig config;
  config.rank = model.rank;
  config.lags = btf::LagSet(parse_lags(model.lags));
  config.noise = parse_noise(model.noise, tensor ? btf::NoiseMode::Isotropic
                                                 : btf::NoiseMode::PerSeries);
  config.dynamics = parse_dynamics(model.dynamics);
  config.burn_in = model.burn_in;
  config.samples = model.samples;
  config.keep_quantiles = !model.no_quantiles;
  config.threads = model.threads;
  return config;
}

using Manifest = std::vector<std::pair<std::string, std::string>>;

void append_data_options(Manifest& m, const DataOptions& data) {
  m.emplace_back("input", data.input);
  m.emplace_back("format", data.format);
  if (!data.dims.empty()) m.emplace_back("dims", data.dims);
  m.emplace_back("t0", std::to_string(data.period));
}

void append_model_options(Manifest& m, const ModelOptions& model, bool tensor) {
  m.emplace_back("rank", std::to_string(model.rank));
  m.emplace_back("lags", model.lags);
  m.emplace_back("burn-in", std::to_string(model.burn_in));
  m.emplace_back("samples", std::to_string(model.samples));
  m.emplace_back("seed", std::to_string(model.seed));
  m.emplace_back("noise",
                 btf::to_string(parse_noise(model.noise, tensor ? btf::NoiseMode::Isotropic
                                                                : btf::NoiseMode::PerSeries)));
  m.emplace_back("dynamics", model.dynamics);
  m.emplace_back("threads", std::to_string(model.threads));
  if (model.no_quantiles) m.emplace_back("no-quantiles", "true");
}

void write_manifest(const std::string& path, const std::string& subcommand,
                    const Manifest& entries, const std::vector<std::string>& notes) {
  std::ofstream out(path);
  if (!out) throw btf::ParseError("cannot write '" + path + "'");
  out << "# btf " << kVersion << " " << subcommand
      << " manifest; reproduce with: btf " << subcommand << " --config <this file>\n";
  for (const auto& [key, value] : entries) out << key << "=" << value << "\n";
  for (const auto& note : notes) out << "# " << note << "\n";
}

void save_trace(const std::string& path, const std::vector<double>& trace) {
  std::ofstream out(path);
  if (!out) throw btf::ParseError("cannot write '" + path + "'");
  out << "sweep,fit_rmse\n";
  char buf[40];
  for (std::size_t k = 0; k < trace.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", trace[k]);
    out << k << ',' << buf << '\n';
  }
}

void save_tensor_grid(const std::string& path, const btf::Grid3<double>& g) {
  std::ofstream out(path);
  if (!out) throw btf::ParseError("cannot write '" + path + "'");
  out << "i,j,t,value\n";
  char buf[40];
  for (int i = 0; i < g.dim0(); ++i) {
    for (int j = 0; j < g.dim1(); ++j) {
      for (int t = 0; t < g.dim2(); ++t) {
        std::snprintf(buf, sizeof(buf), "%.17g", g(i, j, t));
        out << i << ',' << j << ',' << t << ',' << buf << '\n';
      }
    }
  }
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

int run_mask(const DataOptions& data, const btf::MaskSpec& spec, const std::string& output,
             const std::string& index_out, const std::string& mask_out) {
  if (data.format == "matrix") {
    const btf::SeriesMatrix series = btf::load_series_matrix(data.input, data.period);
    const btf::MaskedMatrix res = btf::apply_mask(series, spec);
    btf::save_series_matrix(output, res.data);
    btf::save_matrix_index(index_out, res.held_out);
    if (!mask_out.empty()) btf::save_mask_matrix(mask_out, res.data.mask);
    for (const auto& w : res.warnings) std::cerr << "mask: warning: " << w << "\n";
    std::cerr << "mask: held out " << res.held_out.size() << " cells\n";
  } else {
    if (!mask_out.empty()) {
      std::cerr << "mask: warning: --mask-out applies to matrix format only\n";
    }
    const btf::SeriesTensor series =
        btf::load_series_tensor(data.input, parse_dims(data.dims), data.period);
    const btf::MaskedTensor res = btf::apply_mask(series, spec);
    btf::save_series_tensor(output, res.data);
    btf::save_tensor_index(index_out, res.held_out);
    for (const auto& w : res.warnings) std::cerr << "mask: warning: " << w << "\n";
    std::cerr << "mask: held out " << res.held_out.size() << " cells\n";
  }
  return 0;
}

int run_impute(const DataOptions& data, ModelOptions model, const std::string& prefix) {
  Timer timer;
  Manifest manifest;
  append_data_options(manifest, data);
  const bool tensor = data.format == "tensor-long";
  model.resolve(tensor, data.period);
  append_model_options(manifest, model, tensor);
  manifest.emplace_back("output-prefix", prefix);

  const btf::ModelConfig config = build_config(model, tensor);
  std::vector<std::string> notes;
  if (!tensor) {
    const btf::SeriesMatrix series = btf::load_series_matrix(data.input, data.period);
    const btf::HyperPriors priors = btf::HyperPriors::defaults(config.rank, config.lags.order());
    btf::Rng rng(model.seed);
    const btf::ImputeResult res = btf::impute(series, config, priors, rng);
    btf::save_dense_matrix(prefix + "mean.csv", res.summary.mean);
    btf::save_dense_matrix(prefix + "std.csv", res.summary.stddev);
    if (config.keep_quantiles) {
      btf::save_dense_matrix(prefix + "q05.csv", res.summary.q05);
      btf::save_dense_matrix(prefix + "q95.csv", res.summary.q95);
    }
    save_trace(prefix + "trace.csv", res.fit_rmse);
    for (int i : res.summary.empty_series) {
      notes.push_back("series " + std::to_string(i) + " had no observations");
    }
  } else {
    const btf::SeriesTensor series =
        btf::load_series_tensor(data.input, parse_dims(data.dims), data.period);
    const btf::HyperPriors priors = btf::HyperPriors::defaults(config.rank, config.lags.order());
    btf::Rng rng(model.seed);
    const btf::TensorImputeResult res = btf::impute_tensor(series, config, priors, rng);
    save_tensor_grid(prefix + "mean.csv", res.summary.mean);
    save_tensor_grid(prefix + "std.csv", res.summary.stddev);
    if (config.keep_quantiles) {
      save_tensor_grid(prefix + "q05.csv", res.summary.q05);
      save_tensor_grid(prefix + "q95.csv", res.summary.q95);
    }
    save_trace(prefix + "trace.csv", res.fit_rmse);
    for (const auto& f : res.summary.empty_fibers) {
      notes.push_back("fiber (" + std::to_string(f.i) + "," + std::to_string(f.t) +
                      ") had no observations");
    }
  }
  write_manifest(prefix + "manifest.txt", "impute", manifest, notes);
  std::cerr << "impute: done in " << timer.seconds() << " s\n";
  return 0;
}

int run_forecast(const DataOptions& data, ModelOptions model, int train_steps,
                 const btf::RollingConfig& rolling, const std::string& prefix) {
  Timer timer;
  Manifest manifest;
  append_data_options(manifest, data);
  const bool tensor = data.format == "tensor-long";
  model.resolve(tensor, data.period);
  append_model_options(manifest, model, tensor);
  manifest.emplace_back("train-steps", std::to_string(train_steps));
  manifest.emplace_back("horizon", std::to_string(rolling.horizon));
  manifest.emplace_back("windows", std::to_string(rolling.windows));
  manifest.emplace_back("gamma", std::to_string(rolling.lookback));
  manifest.emplace_back("update-passes", std::to_string(rolling.update_passes));
  if (rolling.retrain_threshold > 0) {
    manifest.emplace_back("retrain-threshold", std::to_string(rolling.retrain_threshold));
  }
  manifest.emplace_back("output-prefix", prefix);

  const btf::ModelConfig config = build_config(model, tensor);
  btf::RollingConfig roll = rolling;
  roll.threads = model.threads;
  std::vector<std::string> notes;
  notes.push_back("evaluation stream ingested as provided (masked cells stay missing)");
  if (!tensor) {
    const btf::SeriesMatrix series = btf::load_series_matrix(data.input, data.period);
    const btf::HyperPriors priors = btf::HyperPriors::defaults(config.rank, config.lags.order());
    btf::Rng rng(model.seed);
    const btf::ForecastResult res =
        btf::rolling_forecast(series, train_steps, config, priors, roll, rng);
    btf::save_dense_matrix(prefix + "mean.csv", res.mean);
    btf::save_dense_matrix(prefix + "std.csv", res.stddev);
    btf::save_dense_matrix(prefix + "q05.csv", res.q05);
    btf::save_dense_matrix(prefix + "q95.csv", res.q95);
    for (std::size_t s = 0; s < res.window_mean.size(); ++s) {
      btf::save_dense_matrix(prefix + "window" + std::to_string(s + 1) + ".csv",
                             res.window_mean[s]);
    }
    for (const auto& w : res.warnings) notes.push_back(w);
    if (res.retrains > 0) notes.push_back("full retrains: " + std::to_string(res.retrains));
  } else {
    const btf::SeriesTensor series =
        btf::load_series_tensor(data.input, parse_dims(data.dims), data.period);
    const btf::HyperPriors priors = btf::HyperPriors::defaults(config.rank, config.lags.order());
    btf::Rng rng(model.seed);
    const btf::ForecastResultTensor res =
        btf::rolling_forecast_tensor(series, train_steps, config, priors, roll, rng);
    save_tensor_grid(prefix + "mean.csv", res.mean);
    save_tensor_grid(prefix + "std.csv", res.stddev);
    save_tensor_grid(prefix + "q05.csv", res.q05);
    save_tensor_grid(prefix + "q95.csv", res.q95);
    for (std::size_t s = 0; s < res.window_mean.size(); ++s) {
      save_tensor_grid(prefix + "window" + std::to_string(s + 1) + ".csv", res.window_mean[s]);
    }
    for (const auto& w : res.warnings) notes.push_back(w);
    if (res.retrains > 0) notes.push_back("full retrains: " + std::to_string(res.retrains));
  }
  write_manifest(prefix + "manifest.txt", "forecast", manifest, notes);
  std::cerr << "forecast: done in " << timer.seconds() << " s\n";
  return 0;
}

int run_eval(const DataOptions& data, const std::string& estimate_path,
             const std::string& index_path) {
  std::vector<double> actual, estimate;
  if (data.format == "matrix") {
    const btf::SeriesMatrix truth = btf::load_series_matrix(data.input, data.period);
    const Eigen::MatrixXd est = btf::load_dense_matrix(estimate_path);
    if (est.rows() != truth.values.rows() || est.cols() != truth.values.cols()) {
      throw btf::ParseError("eval: estimate shape does not match actual");
    }
    std::vector<btf::MatrixCell> cells;
    if (index_path == "all") {
      for (int i = 0; i < truth.n_series(); ++i) {
        for (int t = 0; t < truth.n_steps(); ++t) {
          if (truth.observed(i, t)) cells.push_back({i, t});
        }
      }
    } else {
      cells = btf::load_matrix_index(index_path);
    }
    actual = btf::gather(truth.values, cells);
    estimate = btf::gather(est, cells);
  } else {
    const btf::SeriesTensor truth =
        btf::load_series_tensor(data.input, parse_dims(data.dims), data.period);
    const btf::SeriesTensor est = btf::load_series_tensor(
        estimate_path, btf::TensorDims{truth.dim0(), truth.dim1(), truth.n_steps()},
        data.period);
    std::vector<btf::TensorCell> cells;
    if (index_path == "all") {
      for (int i = 0; i < truth.dim0(); ++i) {
        for (int j = 0; j < truth.dim1(); ++j) {
          for (int t = 0; t < truth.n_steps(); ++t) {
            if (truth.observed(i, j, t)) cells.push_back({i, j, t});
          }
        }
      }
    } else {
      cells = btf::load_tensor_index(index_path);
    }
    actual = btf::gather(truth.values, cells);
    estimate = btf::gather(est.values, cells);
  }

  char buf[64];
  try {
    const btf::MapeResult m = btf::mape(actual, estimate);
    std::snprintf(buf, sizeof(buf), "MAPE %.2f", m.value);
    std::cout << buf << "\n";
    if (m.excluded_zeros > 0) {
      std::cout << "excluded_zero_actuals " << m.excluded_zeros << "\n";
    }
  } catch (const btf::UndefinedMetricError&) {
    std::cout << "MAPE undefined (no nonzero actuals)\n";
  }
  std::snprintf(buf, sizeof(buf), "RMSE %.4f", btf::rmse(actual, estimate));
  std::cout << buf << "\n";
  std::cout << "evaluated " << actual.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian temporal matrix/tensor factorization for incomplete time series"};
  app.require_subcommand(1);

  // mask
  DataOptions mask_data;
  std::string mask_scenario = "rm";
  double mask_rate = 0.0;
  std::uint64_t mask_seed = 0;
  std::string mask_output, mask_index_out;
  CLI::App* mask = app.add_subcommand("mask", "hold out observed cells for evaluation");
  std::string config_path;  // consumed by merge_config before parsing
  mask->add_option("--config", config_path, "key=value file merged under the flags (flags win)");
  add_data_options(mask, mask_data);
  mask->add_option("--scenario", mask_scenario, "rm | nm")
      ->check(CLI::IsMember({"rm", "nm"}));
  mask->add_option("--rate", mask_rate, "missing rate in [0,1)")->required();
  mask->add_option("--seed", mask_seed, "random seed");
  mask->add_option("--output", mask_output, "masked data file")->required();
  mask->add_option("--index-out", mask_index_out, "held-out index file")->required();
  std::string mask_mask_out;
  mask->add_option("--mask-out", mask_mask_out, "also write the 0/1 observation mask (matrix format)");

  // impute
  DataOptions imp_data;
  ModelOptions imp_model;
  std::string imp_prefix;
  CLI::App* imp = app.add_subcommand("impute", "posterior imputation of missing cells");
  imp->add_option("--config", config_path, "key=value file merged under the flags (flags win)");
  add_data_options(imp, imp_data);
  add_model_options(imp, imp_model);
  imp->add_option("--output-prefix", imp_prefix, "prefix for mean/std/q05/q95/manifest files")
      ->required();

  // forecast
  DataOptions fc_data;
  ModelOptions fc_model;
  int fc_train = 0;
  btf::RollingConfig fc_rolling;
  std::string fc_prefix;
  CLI::App* fc = app.add_subcommand("forecast", "multi-step rolling prediction");
  fc->add_option("--config", config_path, "key=value file merged under the flags (flags win)");
  add_data_options(fc, fc_data);
  add_model_options(fc, fc_model);
  fc->add_option("--train-steps", fc_train, "training columns before the evaluation stream")
      ->required();
  fc->add_option("--horizon", fc_rolling.horizon, "steps per window (delta)")
      ->check(CLI::PositiveNumber);
  fc->add_option("--windows", fc_rolling.windows, "number of rolling windows (S)")
      ->check(CLI::PositiveNumber);
  fc->add_option("--gamma", fc_rolling.lookback, "lookback multiplier")
      ->check(CLI::PositiveNumber);
  fc->add_option("--update-passes", fc_rolling.update_passes, "re-draw passes per window")
      ->check(CLI::PositiveNumber);
  fc->add_option("--retrain-threshold", fc_rolling.retrain_threshold,
                 "full retrain when a window MAPE exceeds this (0 = off)");
  fc->add_option("--output-prefix", fc_prefix, "prefix for prediction files")->required();

  // eval
  DataOptions ev_data;
  std::string ev_estimate, ev_index = "all";
  CLI::App* ev = app.add_subcommand("eval", "MAPE/RMSE over a held-out index");
  ev->add_option("--config", config_path, "key=value file merged under the flags (flags win)");
  ev->add_option("--actual", ev_data.input, "ground-truth file")->required();
  ev->add_option("--format", ev_data.format, "matrix | tensor-long")
      ->check(CLI::IsMember({"matrix", "tensor-long"}));
  ev->add_option("--dims", ev_data.dims, "tensor dims as M,N,T");
  ev->add_option("--estimate", ev_estimate, "estimate file")->required();
  ev->add_option("--index", ev_index, "held-out index file, or 'all'");

  std::vector<std::string> args;
  try {
    args = merge_config(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const std::exception& e) {
    std::cerr << "btf: " << e.what() << "\n";
    return 1;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (mask->parsed()) {
      btf::MaskSpec spec;
      spec.scenario = mask_scenario == "rm" ? btf::MissingScenario::Random
                                            : btf::MissingScenario::NonRandom;
      spec.rate = mask_rate;
      spec.seed = mask_seed;
      return run_mask(mask_data, spec, mask_output, mask_index_out, mask_mask_out);
    }
    if (imp->parsed()) return run_impute(imp_data, imp_model, imp_prefix);
    if (fc->parsed()) return run_forecast(fc_data, fc_model, fc_train, fc_rolling, fc_prefix);
    if (ev->parsed()) return run_eval(ev_data, ev_estimate, ev_index);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "btf: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "btf: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "btf: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
