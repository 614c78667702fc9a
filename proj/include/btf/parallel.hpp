// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <functional>

#include "btf/rng.hpp"

namespace btf {

// Runs fn(index, stream) for index in [0, n). Each index receives its own
// child stream derived from `base`, so the result is identical for any
// thread count. `base` advances exactly once per call.
void parallel_for_indexed(int n, int threads, Rng& base,
                          const std::function<void(int, Rng&)>& fn);

}  // namespace btf
