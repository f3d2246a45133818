#include "sgs/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace sgs {

int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("SGS_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

namespace {

// Lazily started pool; work items are (chunk fn, chunk id) pairs popped
// off a shared counter.
class Pool {
 public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  void run(int chunks, const std::function<void(int)>& chunk_fn) {
    if (workers_.empty() || chunks <= 1) {
      for (int i = 0; i < chunks; ++i) chunk_fn(i);
      return;
    }
    {
      std::unique_lock lock(mu_);
      chunk_fn_ = &chunk_fn;
      total_ = chunks;
      next_ = 0;
      done_ = 0;
      ++generation_;
    }
    cv_work_.notify_all();
    help();
    std::unique_lock lock(mu_);
    cv_done_.wait(lock, [&] { return done_ == total_; });
    chunk_fn_ = nullptr;
  }

 private:
  Pool() {
    int n = worker_count() - 1;
    for (int i = 0; i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
  }

  ~Pool() {
    {
      std::unique_lock lock(mu_);
      stopping_ = true;
    }
    cv_work_.notify_all();
    for (auto& w : workers_) w.join();
  }

  void help() {
    while (true) {
      int id;
      {
        std::unique_lock lock(mu_);
        if (next_ >= total_) return;
        id = next_++;
      }
      (*chunk_fn_)(id);
      std::unique_lock lock(mu_);
      if (++done_ == total_) cv_done_.notify_all();
    }
  }

  void worker_loop() {
    uint64_t seen = 0;
    while (true) {
      {
        std::unique_lock lock(mu_);
        cv_work_.wait(lock, [&] { return stopping_ || (generation_ != seen && next_ < total_); });
        if (stopping_) return;
        seen = generation_;
      }
      help();
    }
  }

  std::mutex mu_;
  std::condition_variable cv_work_;
  std::condition_variable cv_done_;
  std::vector<std::thread> workers_;
  const std::function<void(int)>* chunk_fn_ = nullptr;
  int total_ = 0;
  int next_ = 0;
  int done_ = 0;
  uint64_t generation_ = 0;
  bool stopping_ = false;
};

}  // namespace

void parallel_chunks(int n, const std::function<void(int, int, int)>& fn) {
  if (n <= 0) return;
  const int chunks = std::min(kParallelChunks, n);
  auto chunk_fn = [&](int id) {
    const int begin = static_cast<int>(static_cast<long long>(n) * id / chunks);
    const int end = static_cast<int>(static_cast<long long>(n) * (id + 1) / chunks);
    if (begin < end) fn(id, begin, end);
  };
  Pool::instance().run(chunks, chunk_fn);
}

}  // namespace sgs
