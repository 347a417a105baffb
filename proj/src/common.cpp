#include "adbn/error.hpp"
#include "adbn/types.hpp"

#include <algorithm>
#include <atomic>

#include "parallel.hpp"

namespace adbn {

const char* error_kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Config: return "config";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::State: return "state";
  }
  return "unknown";
}

void raise(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) noexcept {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {
std::atomic<unsigned> g_workers{1};
}

void set_worker_count(unsigned workers) noexcept { g_workers.store(workers == 0 ? 1 : workers); }

unsigned worker_count() noexcept { return g_workers.load(); }

namespace detail {

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const unsigned workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  // Static contiguous partition; each index is written by exactly one worker.
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail
}  // namespace adbn
