#include "bnn/executor.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace bnn {

Executor::Executor(std::size_t threads) : threads_(threads) {
  if (threads_ == 0) threads_ = std::max(1u, std::thread::hardware_concurrency());
}

void Executor::parallel_for(std::size_t count,
                            const std::function<void(std::size_t, std::size_t)>& fn) const {
  if (count == 0) return;
  const std::size_t workers = std::min(threads_, count);
  if (workers <= 1) {
    fn(0, count);
    return;
  }

  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(count, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back([&, t, begin, end] {
        try {
          fn(begin, end);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    try {
      fn(0, std::min(count, chunk));
    } catch (...) {
      errors[0] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

const Executor& serial_executor() {
  static const Executor serial(1);
  return serial;
}

}  // namespace bnn
