#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qflow {

/// Base error type for all pipeline failures that are not rule violations.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Parse failure in a binary stream; carries the byte offset of the
/// offending record.
class ParseError : public Error {
public:
  ParseError(const std::string& msg, std::size_t offset)
      : Error(msg + " (byte offset " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
  std::size_t byte_offset;
};

/// Non-fatal diagnostics accumulated by readers and the flattener.
struct Warnings {
  std::vector<std::string> messages;
  // coordinates that had to be snapped to the 1 nm grid (non-90 rotation,
  // fractional magnification, ...); feeds tape-out check T1
  std::uint64_t grid_snaps = 0;

  void add(std::string msg) { messages.push_back(std::move(msg)); }
  bool empty() const { return messages.empty() && grid_snaps == 0; }
};

namespace detail {

inline unsigned worker_count() {
  if (const char* env = std::getenv("QFLOW_THREADS")) {
    long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : (hw > 8 ? 8 : hw);
}

// Static chunking; chunk results must be merged in chunk order by the
// caller if ordering matters.
inline void parallel_chunks(std::size_t n,
                            const std::function<void(std::size_t chunk,
                                                     std::size_t begin,
                                                     std::size_t end)>& fn,
                            std::size_t min_per_chunk = 256) {
  unsigned workers = worker_count();
  if (n == 0) return;
  std::size_t chunks = workers;
  if (n / chunks < min_per_chunk) chunks = n / min_per_chunk + 1;
  if (chunks <= 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(chunks);
  std::size_t per = (n + chunks - 1) / chunks;
  for (std::size_t c = 0; c < chunks; ++c) {
    std::size_t b = c * per, e = (c + 1) * per > n ? n : (c + 1) * per;
    if (b >= e) break;
    pool.emplace_back([&fn, c, b, e] { fn(c, b, e); });
  }
  for (auto& t : pool) t.join();
}

// FNV-1a, used for order-independent shape checksums.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t seed = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail
}  // namespace qflow
