#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pseco {

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for one named randomness concern (data, proposals, views, noise, ...)
/// at a given position (step, slot, scene id). Streams are independent of one
/// another, so enabling a feature that draws from one never shifts another.
std::uint64_t stream_seed(std::uint64_t master, std::string_view concern, std::uint64_t a = 0, std::uint64_t b = 0);

std::mt19937_64 make_stream(std::uint64_t master, std::string_view concern, std::uint64_t a = 0, std::uint64_t b = 0);

/// FNV-1a over raw bytes; used for run checksums.
class Checksum {
 public:
  void add_bytes(const void* data, std::size_t size);
  void add(double v) { add_bytes(&v, sizeof v); }
  void add(std::uint64_t v) { add_bytes(&v, sizeof v); }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace pseco
