#pragma once

// Deterministic chunked parallel reduction.  Work is split into fixed-size
// chunks whose boundaries do not depend on the worker count; per-chunk
// results are combined in chunk order, so integer reductions are identical
// for any number of workers and floating ones drift by at most the usual
// reassociation of a fixed summation tree.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace bihom {

inline int default_workers() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Evaluates fn(i) for i in [0,n) and merges the results with merge(acc, r)
// in index order.  chunk size is fixed; workers steal chunk indices.
template <typename T, typename Fn, typename Merge>
T chunked_reduce(std::size_t n, int workers, T init, Fn&& fn, Merge&& merge,
                 std::size_t chunk = 64) {
  if (n == 0) return init;
  if (workers < 1) workers = 1;
  std::size_t nchunks = (n + chunk - 1) / chunk;
  if (workers == 1 || nchunks == 1) {
    T acc = std::move(init);
    for (std::size_t i = 0; i < n; ++i) merge(acc, fn(i));
    return acc;
  }
  std::vector<T> partial(nchunks, init);
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= nchunks) return;
      std::size_t lo = c * chunk, hi = std::min(n, lo + chunk);
      try {
        T acc = partial[c];
        for (std::size_t i = lo; i < hi; ++i) merge(acc, fn(i));
        partial[c] = std::move(acc);
      } catch (...) {
        std::lock_guard<std::mutex> g(err_mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
  T acc = std::move(init);
  for (std::size_t c = 0; c < nchunks; ++c) merge(acc, partial[c]);
  return acc;
}

// Range flavor: fn(lo, hi, T& acc) accumulates the half-open index range
// into acc, so workers can reuse per-chunk scratch across iterations.  Chunk
// boundaries are fixed; results must not depend on accumulation order
// (integer sums, set unions).
template <typename T, typename Fn, typename Merge>
T chunked_reduce_range(std::size_t n, int workers, T init, Fn&& fn, Merge&& merge,
                       std::size_t chunk = 64) {
  if (n == 0) return init;
  if (workers < 1) workers = 1;
  std::size_t nchunks = (n + chunk - 1) / chunk;
  if (workers == 1 || nchunks == 1) {
    T acc = std::move(init);
    for (std::size_t c = 0; c < nchunks; ++c) fn(c * chunk, std::min(n, (c + 1) * chunk), acc);
    return acc;
  }
  std::vector<T> partial(nchunks, init);
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= nchunks) return;
      try {
        fn(c * chunk, std::min(n, (c + 1) * chunk), partial[c]);
      } catch (...) {
        std::lock_guard<std::mutex> g(err_mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
  T acc = std::move(init);
  for (std::size_t c = 0; c < nchunks; ++c) merge(acc, partial[c]);
  return acc;
}

}  // namespace bihom
