#pragma once

#include <Eigen/Dense>

#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace piham {

// Effective worker count: explicit request, else PIHAM_THREADS, else
// hardware concurrency.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PIHAM_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

// Static strided parallel map over [0, n). Each index is processed exactly
// once and writers target index-addressed slots, so results do not depend
// on the thread count. The first exception thrown by any worker is
// rethrown after all workers join.
inline void parallel_for(Eigen::Index n, int n_threads,
                         const std::function<void(Eigen::Index)>& body) {
  n_threads = std::min<Eigen::Index>(std::max(n_threads, 1), n);
  if (n_threads <= 1) {
    for (Eigen::Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> workers;
  std::exception_ptr error;
  std::mutex error_lock;
  for (int t = 0; t < n_threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (Eigen::Index i = t; i < n; i += n_threads) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> hold(error_lock);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace piham
