#include "otprop/rng.hpp"

#include <cmath>
#include <numbers>

namespace otprop {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

PhiloxBlock philox4x32_10(PhiloxBlock c, PhiloxKey k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

PhiloxStream::PhiloxStream(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}, stream_(stream) {}

std::uint64_t PhiloxStream::next_u64() {
  if (word_pos_ == 2) {
    const PhiloxBlock out = philox4x32_10({static_cast<std::uint32_t>(block_index_),
                                           static_cast<std::uint32_t>(block_index_ >> 32),
                                           static_cast<std::uint32_t>(stream_),
                                           static_cast<std::uint32_t>(stream_ >> 32)},
                                          key_);
    ++block_index_;
    words_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    words_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    word_pos_ = 0;
  }
  return words_[static_cast<std::size_t>(word_pos_++)];
}

double PhiloxStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double PhiloxStream::uniform_open_zero() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

double PhiloxStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = uniform_open_zero();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(angle);
  has_cached_normal_ = true;
  return r * std::cos(angle);
}

}  // namespace otprop
