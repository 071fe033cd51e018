#include "pseco/rng.hpp"

namespace pseco {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::string_view concern, std::uint64_t a, std::uint64_t b) {
  Checksum name;
  name.add_bytes(concern.data(), concern.size());
  std::uint64_t s = splitmix64(master ^ name.value());
  s = splitmix64(s ^ a);
  s = splitmix64(s ^ (b * 0x9e3779b97f4a7c15ULL));
  return s;
}

std::mt19937_64 make_stream(std::uint64_t master, std::string_view concern, std::uint64_t a, std::uint64_t b) {
  return std::mt19937_64(stream_seed(master, concern, a, b));
}

void Checksum::add_bytes(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state_ ^= p[i];
    state_ *= 0x100000001b3ULL;
  }
}

}  // namespace pseco
