#include "mdt/parallel.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace mdt {
namespace {

int detect_threads() {
  if (const char* s = std::getenv("MDT_SINGLE_THREAD"); s && s[0] == '1') return 1;
  if (const char* s = std::getenv("MDT_THREADS")) {
    const int n = std::atoi(s);
    if (n >= 1) return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Minimal persistent pool. Tasks are (begin,end) chunks; the submitting
// thread participates in the work and blocks until all chunks are done.
class Pool {
public:
  explicit Pool(int workers) {
    for (int i = 0; i < workers; ++i)
      threads_.emplace_back([this] { worker(); });
  }

  ~Pool() {
    {
      std::lock_guard lk(m_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void run(std::int64_t n, std::int64_t chunk,
           const std::function<void(std::int64_t, std::int64_t)>& fn) {
    std::unique_lock lk(m_);
    fn_ = &fn;
    next_ = 0;
    total_ = n;
    chunk_ = chunk;
    pending_ = (n + chunk - 1) / chunk;
    cv_.notify_all();
    // Participate from the calling thread.
    while (claim(lk)) {
    }
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    fn_ = nullptr;
  }

private:
  bool claim(std::unique_lock<std::mutex>& lk) {
    if (next_ >= total_) return false;
    const std::int64_t b = next_;
    const std::int64_t e = std::min(total_, b + chunk_);
    next_ = e;
    lk.unlock();
    (*fn_)(b, e);
    lk.lock();
    if (--pending_ == 0) done_cv_.notify_all();
    return true;
  }

  void worker() {
    std::unique_lock lk(m_);
    for (;;) {
      cv_.wait(lk, [this] { return stop_ || (fn_ && next_ < total_); });
      if (stop_) return;
      while (claim(lk)) {
      }
    }
  }

  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  std::vector<std::thread> threads_;
  const std::function<void(std::int64_t, std::int64_t)>* fn_ = nullptr;
  std::int64_t next_ = 0, total_ = 0, chunk_ = 1, pending_ = 0;
  bool stop_ = false;
};

}  // namespace

int thread_count() {
  static const int n = detect_threads();
  return n;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  const int nt = thread_count();
  if (nt <= 1 || n < 2) {
    fn(0, n);
    return;
  }
  // Fixed chunking: results do not depend on which thread runs which chunk.
  const std::int64_t chunk = std::max<std::int64_t>(1, n / (4 * nt));
  static Pool pool(thread_count() - 1);
  pool.run(n, chunk, fn);
}

}  // namespace mdt
