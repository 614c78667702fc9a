// Apache License, Version 2.0, refer to LICENSE.txt
#include "btf/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace btf {

void parallel_for_indexed(int n, int threads, Rng& base,
                          const std::function<void(int, Rng&)>& fn) {
  if (n <= 0) return;
  const std::uint64_t phase_key = base.next_u64();
  auto run_index = [&](int index) {
    Rng stream(mix_u64(phase_key ^ mix_u64(static_cast<std::uint64_t>(index))));
    fn(index, stream);
  };

  const int workers = std::min(threads, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) run_index(i);
    return;
  }

  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          run_index(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace btf
