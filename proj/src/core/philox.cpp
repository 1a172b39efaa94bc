#include "fbsde/core/philox.hpp"

#include <cmath>
#include <numbers>

namespace fbsde {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void round(PhiloxCounter& c, const PhiloxKey& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    round(ctr, key);
  }
  return ctr;
}

std::array<double, 2> gaussian_pair(PhiloxCounter ctr, PhiloxKey key) {
  const PhiloxCounter r = philox4x32(ctr, key);
  const double u1 = 1.0 - uniform53(r[0], r[1]);
  const double u2 = uniform53(r[2], r[3]);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  return {rad * std::cos(ang), rad * std::sin(ang)};
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t domain, std::uint64_t a,
                          std::uint64_t b) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ domain);
  h = mix64(h ^ a);
  return mix64(h ^ b);
}

double UniformStream::next() {
  if (used_ >= 4) {
    buffer_ = philox4x32({static_cast<std::uint32_t>(block_),
                          static_cast<std::uint32_t>(block_ >> 32), 0x556e6966u, 0u},
                         key_);
    ++block_;
    used_ = 0;
  }
  const double u = uniform53(buffer_[used_], buffer_[used_ + 1]);
  used_ += 2;
  return u;
}

}  // namespace fbsde
