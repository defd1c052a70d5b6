#pragma once

#include <cstdint>
#include <string_view>

namespace coherencekit {

// FNV-1a, 64-bit.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic stream keyed by (seed, example id, span). Platform-stable:
// no std distributions are involved.
class KeyedRng {
 public:
  KeyedRng(std::uint64_t seed, std::string_view example_id, int start, int end) {
    std::uint64_t h = splitmix64(seed);
    h = fnv1a64(example_id, h);
    h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(start)));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(end)) << 32));
    state_ = h;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64(state_);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound).
  int next_below(int bound) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(bound));
  }

 private:
  std::uint64_t state_;
};

}  // namespace coherencekit
