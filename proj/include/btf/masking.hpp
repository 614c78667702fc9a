// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "btf/series.hpp"

namespace btf {

// Random missing (RM) removes observed cells uniformly at random.
// Non-random missing (NM) removes whole location x day fibers: contiguous
// blocks of `period` time steps (per (i, j) pair for tensors).
enum class MissingScenario { Random, NonRandom };

struct MaskSpec {
  MissingScenario scenario = MissingScenario::Random;
  double rate = 0.0;  // in [0, 1)
  std::uint64_t seed = 0;
};

struct MaskedMatrix {
  SeriesMatrix data;
  std::vector<MatrixCell> held_out;  // removed cells that were observed
  std::vector<std::string> warnings;
};

struct MaskedTensor {
  SeriesTensor data;
  std::vector<TensorCell> held_out;
  std::vector<std::string> warnings;
};

MaskedMatrix apply_mask(const SeriesMatrix& series, const MaskSpec& spec);
MaskedTensor apply_mask(const SeriesTensor& series, const MaskSpec& spec);

}  // namespace btf
