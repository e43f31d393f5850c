// SPDX-License-Identifier: Apache-2.0
#include "remreg/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace remreg {

int thread_count() {
  static const int n = [] {
    const char* env = std::getenv("REMREG_THREADS");
    if (!env) return 1;
    try {
      const int v = std::stoi(env);
      return v > 0 ? v : 1;
    } catch (...) {
      return 1;
    }
  }();
  return n;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body) {
  const int workers = static_cast<int>(std::min<std::int64_t>(thread_count(), n));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::int64_t i = w; i < n; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace remreg
