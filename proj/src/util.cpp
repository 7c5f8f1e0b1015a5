#include "cgf/util.hpp"

#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>
#include <vector>

#include "cgf/error.hpp"

namespace cgf {

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t basis) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = basis;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::Io, "cannot open for hashing: " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buffer[1 << 16];
  while (in) {
    in.read(buffer, sizeof(buffer));
    std::streamsize got = in.gcount();
    if (got > 0) h = fnv1a64(buffer, static_cast<std::size_t>(got), h);
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stage) {
  std::uint64_t h = fnv1a64(stage.data(), stage.size());
  return h ^ (root * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
}

std::string format_double(double value) {
  char buffer[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buffer, sizeof(buffer), "%.*g", precision, value);
    double parsed = 0.0;
    std::sscanf(buffer, "%lf", &parsed);
    if (parsed == value) return buffer;
  }
  return buffer;
}

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  if (threads == 0) threads = std::thread::hardware_concurrency();
  if (threads <= 1 || count == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  if (threads > count) threads = static_cast<unsigned>(count);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (std::size_t i = t; i < count; i += threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace cgf
