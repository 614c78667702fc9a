// Apache License, Version 2.0, refer to LICENSE.txt
#include "btf/masking.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "btf/rng.hpp"

namespace btf {

namespace {

void check_spec(const MaskSpec& spec) {
  if (!(spec.rate >= 0.0) || spec.rate >= 1.0) {
    throw std::invalid_argument("MaskSpec: rate must lie in [0, 1)");
  }
}

// First k elements of a seeded uniform permutation (partial Fisher-Yates).
std::vector<std::size_t> choose(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::size_t target_count(double rate, std::size_t n) {
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
}

}  // namespace

MaskedMatrix apply_mask(const SeriesMatrix& series, const MaskSpec& spec) {
  check_spec(spec);
  series.validate();
  MaskedMatrix out;
  out.data = series;
  if (spec.rate == 0.0) return out;

  Rng rng(spec.seed);
  if (spec.scenario == MissingScenario::Random) {
    std::vector<MatrixCell> observed;
    observed.reserve(static_cast<std::size_t>(series.observed_count()));
    for (int i = 0; i < series.n_series(); ++i) {
      for (int t = 0; t < series.n_steps(); ++t) {
        if (series.observed(i, t)) observed.push_back({i, t});
      }
    }
    for (std::size_t idx : choose(observed.size(), target_count(spec.rate, observed.size()), rng)) {
      const MatrixCell cell = observed[idx];
      out.data.clear_cell(cell.i, cell.t);
      out.held_out.push_back(cell);
    }
  } else {
    if (series.n_steps() % series.period != 0) {
      throw std::invalid_argument("apply_mask: NM scenario needs n_steps divisible by period");
    }
    const int n_days = series.n_steps() / series.period;
    const std::size_t n_fibers = static_cast<std::size_t>(series.n_series()) * n_days;
    for (std::size_t idx : choose(n_fibers, target_count(spec.rate, n_fibers), rng)) {
      const int i = static_cast<int>(idx / n_days);
      const int day = static_cast<int>(idx % n_days);
      for (int s = 0; s < series.period; ++s) {
        const int t = day * series.period + s;
        if (series.observed(i, t)) {
          out.data.clear_cell(i, t);
          out.held_out.push_back({i, t});
        }
      }
    }
  }

  for (int i = 0; i < out.data.n_series(); ++i) {
    if (!out.data.mask.row(i).any()) {
      out.warnings.push_back("series " + std::to_string(i) + " lost all observations");
    }
  }
  return out;
}

MaskedTensor apply_mask(const SeriesTensor& series, const MaskSpec& spec) {
  check_spec(spec);
  series.validate();
  MaskedTensor out;
  out.data = series;
  if (spec.rate == 0.0) return out;

  Rng rng(spec.seed);
  if (spec.scenario == MissingScenario::Random) {
    std::vector<TensorCell> observed;
    observed.reserve(static_cast<std::size_t>(series.observed_count()));
    for (int i = 0; i < series.dim0(); ++i) {
      for (int j = 0; j < series.dim1(); ++j) {
        for (int t = 0; t < series.n_steps(); ++t) {
          if (series.observed(i, j, t)) observed.push_back({i, j, t});
        }
      }
    }
    for (std::size_t idx : choose(observed.size(), target_count(spec.rate, observed.size()), rng)) {
      const TensorCell cell = observed[idx];
      out.data.clear_cell(cell.i, cell.j, cell.t);
      out.held_out.push_back(cell);
    }
  } else {
    if (series.n_steps() % series.period != 0) {
      throw std::invalid_argument("apply_mask: NM scenario needs n_steps divisible by period");
    }
    const int n_days = series.n_steps() / series.period;
    const std::size_t n_fibers =
        static_cast<std::size_t>(series.dim0()) * series.dim1() * n_days;
    for (std::size_t idx : choose(n_fibers, target_count(spec.rate, n_fibers), rng)) {
      const int day = static_cast<int>(idx % n_days);
      const std::size_t ij = idx / n_days;
      const int j = static_cast<int>(ij % series.dim1());
      const int i = static_cast<int>(ij / series.dim1());
      for (int s = 0; s < series.period; ++s) {
        const int t = day * series.period + s;
        if (series.observed(i, j, t)) {
          out.data.clear_cell(i, j, t);
          out.held_out.push_back({i, j, t});
        }
      }
    }
  }

  for (int i = 0; i < out.data.dim0(); ++i) {
    for (int j = 0; j < out.data.dim1(); ++j) {
      bool any = false;
      for (int t = 0; t < out.data.n_steps() && !any; ++t) any = out.data.observed(i, j, t);
      if (!any) {
        out.warnings.push_back("fiber (" + std::to_string(i) + "," + std::to_string(j) +
                               ") lost all observations");
      }
    }
  }
  return out;
}

}  // namespace btf
