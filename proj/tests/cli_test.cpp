// Apache License, Version 2.0, refer to LICENSE.txt
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "btf/csv_io.hpp"
#include "btf/series.hpp"
#include "support/synthetic.hpp"

#ifdef BTF_CLI_PATH

namespace {

namespace fs = std::filesystem;

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "btf_cli_test";
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, const fs::path& stdout_file = {}) {
  std::string cmd = std::string(BTF_CLI_PATH) + " " + args;
  if (!stdout_file.empty()) cmd += " > " + stdout_file.string();
  cmd += " 2> " + (work_dir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) { return slurp(a) == slurp(b); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("eval of a file against itself prints zero error") {
  const fs::path dir = work_dir();
  const fs::path data = dir / "identity.csv";
  const auto synth = btf::testing::make_btmf_synthetic(4, 12, 2, btf::LagSet({1}), 0.1, 1);
  btf::save_series_matrix(data.string(), synth.data);
  const fs::path out = dir / "eval_out.txt";
  const int code = run_cli("eval --actual " + data.string() + " --estimate " + data.string() +
                               " --index all",
                           out);
  CHECK(code == 0);
  const std::string text = slurp(out);
  CHECK(text.find("MAPE 0.00") != std::string::npos);
  CHECK(text.find("RMSE 0.0000") != std::string::npos);
}

TEST_CASE("impute runs are byte-identical for a fixed seed and reproducible from the manifest") {
  const fs::path dir = work_dir();
  const fs::path data = dir / "impute_in.csv";
  auto synth = btf::testing::make_btmf_synthetic(6, 40, 2, btf::LagSet({1, 2}), 0.1, 2);
  for (int i = 0; i < 6; ++i) synth.data.clear_cell(i, 3 + i);
  btf::save_series_matrix(data.string(), synth.data);

  const std::string flags = "impute --input " + data.string() +
                            " --rank 2 --lags 1,2 --burn-in 20 --samples 10 --seed 42"
                            " --output-prefix ";
  const std::string p1 = (dir / "run1_").string();
  const std::string p2 = (dir / "run2_").string();
  REQUIRE(run_cli(flags + p1) == 0);
  REQUIRE(run_cli(flags + p2) == 0);
  for (const char* name : {"mean.csv", "std.csv", "q05.csv", "q95.csv", "trace.csv"}) {
    CHECK(same_bytes(p1 + name, p2 + name));
  }
  // Manifests differ only in the output prefix itself.
  auto normalized = [](const fs::path& path) {
    std::istringstream in(slurp(path));
    std::string line, kept;
    while (std::getline(in, line)) {
      if (line.rfind("output-prefix=", 0) == 0) continue;
      kept += line + "\n";
    }
    return kept;
  };
  CHECK(normalized(p1 + "manifest.txt") == normalized(p2 + "manifest.txt"));

  // The manifest alone reproduces the run.
  const fs::path saved = dir / "saved_mean.csv";
  fs::copy_file(p1 + "mean.csv", saved, fs::copy_options::overwrite_existing);
  REQUIRE(run_cli("impute --config " + p1 + "manifest.txt") == 0);
  CHECK(same_bytes(p1 + "mean.csv", saved));
}

TEST_CASE("mask writes block-structured held-out indices in nm mode") {
  const fs::path dir = work_dir();
  const fs::path data = dir / "mask_in.csv";
  Eigen::MatrixXd vals = Eigen::MatrixXd::Constant(3, 8, 5.0);
  btf::save_series_matrix(data.string(), btf::SeriesMatrix::from_dense(vals, 4));
  const fs::path masked = dir / "masked.csv";
  const fs::path index = dir / "held.csv";
  const int code = run_cli("mask --input " + data.string() +
                           " --scenario nm --rate 0.5 --t0 4 --seed 9 --output " +
                           masked.string() + " --index-out " + index.string());
  CHECK(code == 0);
  const auto held = btf::load_matrix_index(index.string());
  CHECK(held.size() == 12);  // round(0.5 * 6 fibers) = 3 fibers of 4 cells
  const btf::SeriesMatrix back = btf::load_series_matrix(masked.string(), 4);
  CHECK(back.observed_count() == 3 * 8 - 12);
  // Each removed fiber is one whole day.
  for (const auto& cell : held) {
    const int day = cell.t / 4;
    for (int s = 0; s < 4; ++s) CHECK_FALSE(back.observed(cell.i, day * 4 + s));
  }
}

TEST_CASE("forecast emits per-window files and a manifest") {
  const fs::path dir = work_dir();
  const fs::path data = dir / "fc_in.csv";
  const auto synth = btf::testing::make_btmf_synthetic(4, 46, 2, btf::LagSet({1}), 0.1, 3);
  btf::save_series_matrix(data.string(), synth.data);
  const std::string prefix = (dir / "fc_").string();
  const int code = run_cli("forecast --input " + data.string() +
                           " --train-steps 40 --horizon 3 --windows 2 --gamma 2"
                           " --rank 2 --lags 1 --burn-in 15 --samples 6 --seed 5"
                           " --output-prefix " +
                           prefix);
  CHECK(code == 0);
  CHECK(fs::exists(prefix + "mean.csv"));
  CHECK(fs::exists(prefix + "window1.csv"));
  CHECK(fs::exists(prefix + "window2.csv"));
  CHECK(fs::exists(prefix + "manifest.txt"));
  const Eigen::MatrixXd mean = btf::load_dense_matrix(prefix + "mean.csv");
  CHECK(mean.rows() == 4);
  CHECK(mean.cols() == 6);
}

TEST_CASE("tensor pipeline: mask, impute, eval") {
  const fs::path dir = work_dir();
  const fs::path data = dir / "tensor_in.csv";
  const auto synth = btf::testing::make_bttf_synthetic(3, 3, 24, 2, btf::LagSet({1}), 0.1, 4);
  btf::save_series_tensor(data.string(), synth.data);
  const fs::path masked = dir / "tensor_masked.csv";
  const fs::path index = dir / "tensor_held.csv";
  REQUIRE(run_cli("mask --input " + data.string() +
                  " --format tensor-long --dims 3,3,24 --scenario rm --rate 0.3 --seed 6"
                  " --output " +
                  masked.string() + " --index-out " + index.string()) == 0);
  const std::string prefix = (dir / "tensor_").string();
  REQUIRE(run_cli("impute --input " + masked.string() +
                  " --format tensor-long --dims 3,3,24 --rank 2 --lags 1"
                  " --burn-in 20 --samples 8 --seed 7 --output-prefix " +
                  prefix) == 0);
  const fs::path out = dir / "tensor_eval.txt";
  const int code = run_cli("eval --actual " + data.string() +
                               " --format tensor-long --dims 3,3,24 --estimate " + prefix +
                               "mean.csv --index " + index.string(),
                           out);
  CHECK(code == 0);
  const std::string text = slurp(out);
  CHECK(text.find("RMSE") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("impute") == 2);                       // missing required options
  CHECK(run_cli("no-such-subcommand") == 2);
  const fs::path dir = work_dir();
  CHECK(run_cli("mask --input x.csv --rate 2.0 --output a --index-out b") != 0);
}

TEST_CASE("runtime failures exit with code 1") {
  const fs::path dir = work_dir();
  CHECK(run_cli("impute --input " + (dir / "missing_file.csv").string() +
                " --rank 2 --lags 1 --burn-in 1 --samples 1 --output-prefix " +
                (dir / "x_").string()) == 1);
}

}  // TEST_SUITE

#endif  // BTF_CLI_PATH
