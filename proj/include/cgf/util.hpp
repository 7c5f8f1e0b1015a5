#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace cgf {

// FNV-1a over a byte sequence; used for content hashes and seed derivation.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t basis = 14695981039346656037ull);

std::uint64_t hash_file(const std::string& path);

// Derives a per-stage seed from a root seed so that independent pipeline
// stages draw from decorrelated streams.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stage);

// Shortest decimal form that round-trips a double exactly.
std::string format_double(double value);

// Runs fn(i) for i in [0, count). Deterministic output regardless of thread
// count: each index writes only its own slot. threads == 0 picks the
// hardware concurrency.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace cgf
