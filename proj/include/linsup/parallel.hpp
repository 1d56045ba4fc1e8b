// Copyright 2026 The linsup Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LINSUP_PARALLEL_HPP_
#define LINSUP_PARALLEL_HPP_

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace linsup {

// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index is
// handled exactly once; results must be written to per-index slots so the
// outcome does not depend on the thread count. The exception of the lowest
// failing index is rethrown after all workers finish.
template <typename Fn>
void ParallelFor(long count, int threads, Fn&& fn) {
  if (count <= 0) return;
  threads = std::max(1, std::min<int>(threads, static_cast<int>(std::min<long>(count, 1 << 16))));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<long> next{0};
  auto worker = [&] {
    for (long i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace linsup

#endif  // LINSUP_PARALLEL_HPP_
