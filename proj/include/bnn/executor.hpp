#pragma once

#include <cstddef>
#include <functional>

namespace bnn {

/// Runs index-range tasks on a fixed number of threads. Each call to
/// parallel_for splits [0, count) into contiguous chunks and blocks until all
/// of them finish. Chunk boundaries depend only on `count` and the thread
/// count, never on timing.
class Executor {
 public:
  /// threads == 0 selects std::thread::hardware_concurrency().
  explicit Executor(std::size_t threads = 1);

  std::size_t threads() const noexcept { return threads_; }

  void parallel_for(std::size_t count,
                    const std::function<void(std::size_t begin, std::size_t end)>& fn) const;

 private:
  std::size_t threads_;
};

/// Single-threaded executor used when callers pass no executor.
const Executor& serial_executor();

}  // namespace bnn
