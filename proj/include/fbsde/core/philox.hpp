#pragma once

#include <array>
#include <cstdint>

namespace fbsde {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key);

inline PhiloxKey philox_key(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

/// 53-bit uniform in [0, 1) from two 32-bit words.
inline double uniform53(std::uint32_t hi, std::uint32_t lo) {
  return (static_cast<double>(hi >> 5) * 67108864.0 + static_cast<double>(lo >> 6)) *
         (1.0 / 9007199254740992.0);
}

/// Two standard normals from one Philox block (Box–Muller).
std::array<double, 2> gaussian_pair(PhiloxCounter ctr, PhiloxKey key);

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent seed for a (domain, a, b) tuple.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t domain, std::uint64_t a = 0,
                          std::uint64_t b = 0);

/// Sequential uniform stream over consecutive Philox counters.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : key_(philox_key(seed)) {}
  double next();

 private:
  PhiloxKey key_;
  std::uint64_t block_ = 0;
  PhiloxCounter buffer_{};
  int used_ = 4;
};

namespace seed_domain {
inline constexpr std::uint64_t train = 0x7472616e;
inline constexpr std::uint64_t test = 0x74657374;
inline constexpr std::uint64_t init = 0x696e6974;
inline constexpr std::uint64_t run = 0x72756e73;
}  // namespace seed_domain

}  // namespace fbsde
