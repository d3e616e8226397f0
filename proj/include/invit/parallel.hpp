#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace invit {

inline int hardware_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

/// Runs fn(i) for i in [0, n). With workers <= 1 this is a plain loop; with
/// more workers the index range is split into contiguous chunks. Callers are
/// responsible for making results independent of the split (e.g. by writing
/// into per-index slots), which keeps outputs identical across worker counts.
template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const size_t nw = std::min<size_t>(static_cast<size_t>(workers), n);
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errs(nw);
  threads.reserve(nw);
  for (size_t w = 0; w < nw; ++w) {
    const size_t lo = n * w / nw;
    const size_t hi = n * (w + 1) / nw;
    threads.emplace_back([&, lo, hi, w] {
      try {
        for (size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errs[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errs) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace invit
