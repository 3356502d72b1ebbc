#pragma once

#include <cstdint>

namespace cutwalk {

// Counter-based stream: draw i of stream s under master seed m is a pure
// function of (m, s, i), so trajectory results do not depend on worker
// scheduling.  Mixing is the splitmix64 finalizer applied twice.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : key_(mix(mix(master_seed ^ 0x9E3779B97F4A7C15ull) ^
                 mix(stream_index + 0xD1B54A32D192ED03ull))) {}

  std::uint64_t next_u64() {
    std::uint64_t z = key_ + (++counter_) * 0x9E3779B97F4A7C15ull;
    return mix(mix(z));
  }

  // Uniform in [0,1) with 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1p-53; }

  std::uint64_t draws() const { return counter_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace cutwalk
