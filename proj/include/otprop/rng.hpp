#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11) with
// Box-Muller normals. Output depends only on (seed, stream, draw index), so
// simulated data is reproducible across platforms and implementations.

#include <array>
#include <cstdint>

namespace otprop {

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// One Philox4x32-10 block.
PhiloxBlock philox4x32_10(PhiloxBlock counter, PhiloxKey key);

/// Sequential stream over Philox blocks.
///
/// key = (seed low 32 bits, seed high 32 bits); counter = (n low, n high,
/// stream low, stream high) for block n. Each block yields two 64-bit words
/// (w0 = c1:c0, w1 = c3:c2). Uniforms use the top 53 bits of a word.
class PhiloxStream {
 public:
  explicit PhiloxStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in (0, 1].
  double uniform_open_zero();
  /// Standard normal; Box-Muller pairs, the second value is cached.
  double normal();

 private:
  PhiloxKey key_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  std::array<std::uint64_t, 2> words_{};
  int word_pos_ = 2;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace otprop
