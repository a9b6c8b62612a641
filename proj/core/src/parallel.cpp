#include "ecgdnn/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace ecgdnn {
namespace {

thread_local bool tls_inside_pool = false;

// Minimal persistent pool. Work items are (begin, end) chunk closures; the
// calling thread participates, so n_threads == 1 never touches the pool.
// Nested parallel_for calls run inline on the calling worker.
class Pool {
 public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  void resize(int n) {
    std::unique_lock lock(config_mutex_);
    if (n == size_ + 1) return;
    shutdown();
    size_ = n - 1;
    stop_ = false;
    for (int i = 0; i < size_; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  int size() {
    std::unique_lock lock(config_mutex_);
    return size_ + 1;
  }

  void run(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (tls_inside_pool) {
      if (n > 0) fn(0, n);
      return;
    }
    std::unique_lock config_lock(config_mutex_);
    const int nthreads = size_ + 1;
    if (nthreads == 1 || n <= 1) {
      if (n > 0) fn(0, n);
      return;
    }
    {
      std::unique_lock lock(mutex_);
      job_fn_ = &fn;
      job_n_ = n;
      job_chunks_ = static_cast<std::size_t>(nthreads);
      next_chunk_ = 0;
      pending_ = job_chunks_;
      ++generation_;
    }
    cv_.notify_all();
    // The caller works too.
    while (claim_and_run()) {
    }
    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    job_fn_ = nullptr;
  }

  ~Pool() { shutdown(); }

 private:
  void shutdown() {
    {
      std::unique_lock lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
    workers_.clear();
  }

  bool claim_and_run() {
    std::size_t chunk;
    const std::function<void(std::size_t, std::size_t)>* fn;
    std::size_t n, chunks;
    {
      std::unique_lock lock(mutex_);
      if (job_fn_ == nullptr || next_chunk_ >= job_chunks_) return false;
      chunk = next_chunk_++;
      fn = job_fn_;
      n = job_n_;
      chunks = job_chunks_;
    }
    const std::size_t begin = chunk * n / chunks;
    const std::size_t end = (chunk + 1) * n / chunks;
    if (begin < end) {
      tls_inside_pool = true;
      (*fn)(begin, end);
      tls_inside_pool = false;
    }
    {
      std::unique_lock lock(mutex_);
      if (--pending_ == 0) done_cv_.notify_all();
    }
    return true;
  }

  void worker_loop() {
    std::uint64_t seen_generation = 0;
    while (true) {
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] {
          return stop_ || (job_fn_ != nullptr && generation_ != seen_generation);
        });
        if (stop_) return;
        seen_generation = generation_;
      }
      while (claim_and_run()) {
      }
    }
  }

  std::mutex config_mutex_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::vector<std::thread> workers_;
  int size_ = 0;  // worker count, excluding the caller
  bool stop_ = false;

  const std::function<void(std::size_t, std::size_t)>* job_fn_ = nullptr;
  std::size_t job_n_ = 0;
  std::size_t job_chunks_ = 0;
  std::size_t next_chunk_ = 0;
  std::size_t pending_ = 0;
  std::uint64_t generation_ = 0;
};

}  // namespace

void set_num_threads(int n) {
  if (n < 1) n = 1;
  Pool::instance().resize(n);
}

int num_threads() { return Pool::instance().size(); }

void parallel_for_chunks(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
  Pool::instance().run(n, fn);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  parallel_for_chunks(n, [&fn](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace ecgdnn
