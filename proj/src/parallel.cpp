#include "lsr/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace lsr {
namespace {

thread_local bool t_in_worker = false;

int env_thread_cap() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("LSR_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return std::min(hw, v);
  }
  return hw;
}

std::atomic<int> g_max_threads{0};  // 0 = not yet initialized

// Minimal persistent pool. A job is a closure that pulls chunk ranges from a
// shared atomic counter; the submitting thread participates while up to
// `slots` pool workers join in.
class Pool {
 public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  void run(int slots, const std::function<void()>& job) {
    std::lock_guard<std::mutex> serial(run_mu_);
    slots = std::min<int>(slots, static_cast<int>(threads_.size()));
    if (slots <= 0) {
      job();
      return;
    }
    {
      std::lock_guard<std::mutex> lk(mu_);
      job_ = &job;
      slots_ = slots;
      running_ = 0;
      ++generation_;
    }
    cv_.notify_all();
    job();  // submitter participates
    {
      std::unique_lock<std::mutex> lk(mu_);
      done_cv_.wait(lk, [&] { return slots_ == 0 && running_ == 0; });
      job_ = nullptr;
    }
  }

 private:
  Pool() {
    int n = std::max(0, static_cast<int>(std::thread::hardware_concurrency()) - 1);
    for (int i = 0; i < n; ++i) threads_.emplace_back([this] { worker(); });
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void worker() {
    t_in_worker = true;
    std::uint64_t seen = 0;
    while (true) {
      const std::function<void()>* job = nullptr;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        if (slots_ > 0) {
          --slots_;
          ++running_;
          job = job_;
        }
      }
      if (job) {
        (*job)();
        std::lock_guard<std::mutex> lk(mu_);
        --running_;
        if (slots_ == 0 && running_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::mutex run_mu_;  // serializes concurrent parallel_for callers
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  std::vector<std::thread> threads_;
  const std::function<void()>* job_ = nullptr;
  int slots_ = 0;
  int running_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace

int max_threads() {
  int v = g_max_threads.load(std::memory_order_relaxed);
  if (v == 0) {
    v = env_thread_cap();
    g_max_threads.store(v, std::memory_order_relaxed);
  }
  return v;
}

void set_max_threads(int n) { g_max_threads.store(std::max(1, n), std::memory_order_relaxed); }

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  const int threads = static_cast<int>(std::min<std::int64_t>(max_threads(), n));
  if (threads <= 1 || t_in_worker) {
    fn(0, n);
    return;
  }

  const std::int64_t grain = std::max<std::int64_t>(1, n / (threads * 4));
  std::atomic<std::int64_t> next{0};
  auto drain = [&] {
    while (true) {
      const std::int64_t begin = next.fetch_add(grain, std::memory_order_relaxed);
      if (begin >= n) break;
      fn(begin, std::min(begin + grain, n));
    }
  };
  Pool::instance().run(threads - 1, drain);
}

}  // namespace lsr
