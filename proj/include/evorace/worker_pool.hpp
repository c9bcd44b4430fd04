#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace evorace {

// Index-driven task fan-out. Tasks are pure functions of their index, so
// results never depend on which worker ran them or in what order; callers
// write into pre-sized slots.
class WorkerPool {
 public:
  explicit WorkerPool(int workers)
      : workers_(workers < 1 ? 1 : workers) {}

  int width() const { return workers_; }

  // Runs fn(task_index, worker_slot) for every index in [0, n); blocks until
  // all tasks finish. The first exception thrown by a task is rethrown.
  void run(int n, const std::function<void(int, int)>& fn) {
    if (n <= 0) return;
    if (workers_ == 1) {
      for (int i = 0; i < n; ++i) fn(i, 0);
      return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    const int width = std::min(workers_, n);
    threads.reserve(width);
    for (int slot = 0; slot < width; ++slot) {
      threads.emplace_back([&, slot] {
        for (;;) {
          const int i = next.fetch_add(1, std::memory_order_relaxed);
          if (i >= n || failed.load(std::memory_order_relaxed)) return;
          try {
            fn(i, slot);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
            failed.store(true, std::memory_order_relaxed);
            return;
          }
        }
      });
    }
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
  }

 private:
  int workers_;
};

}  // namespace evorace
