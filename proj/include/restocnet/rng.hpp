#ifndef RESTOCNET_RNG_HPP
#define RESTOCNET_RNG_HPP

#include <array>
#include <cstdint>

namespace restocnet::rng {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Every random number in the pipeline is addressed by semantic coordinates
/// (seed, phase, subtag, c0, c1, c2) instead of sequential generator state, so
/// results are identical for any execution order or worker count.
struct Block {
  std::array<std::uint32_t, 4> lane;

  /// Uniform in (0,1): (x + 0.5) / 2^32 — never exactly 0 or 1.
  double u01(int i) const { return (static_cast<double>(lane[static_cast<std::size_t>(i)]) + 0.5) * 0x1p-32; }

  /// Uniform 64-bit value from two lanes.
  std::uint64_t u64(int lo, int hi) const {
    return (static_cast<std::uint64_t>(lane[static_cast<std::size_t>(hi)]) << 32) | lane[static_cast<std::size_t>(lo)];
  }
};

inline Block philox4x32_10(std::array<std::uint32_t, 4> ctr,
                           std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u, kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return Block{{ctr[0], ctr[1], ctr[2], ctr[3]}};
}

/// Independent random streams, one per pipeline stage.
enum class Phase : std::uint32_t {
  Encode = 1,
  InitKernels = 2,
  MapDropout = 3,
  StdpSwitch = 4,
  ClassifierInit = 5,
  ClassifierDropout = 6,
  ClassifierShuffle = 7,
  FcsnnInit = 8,
  FcsnnSwitch = 9,
  Test = 15,
};

/// One 4-lane block addressed by (seed, phase, subtag, c0, c1, c2).
/// `subtag` distinguishes layers / dataset splits / pass ids within a phase.
inline Block draw(std::uint64_t seed, Phase phase, std::uint32_t subtag,
                  std::uint32_t c0, std::uint32_t c1, std::uint32_t c2) {
  const std::array<std::uint32_t, 4> ctr{
      c0, c1, c2, (static_cast<std::uint32_t>(phase) << 16) | (subtag & 0xFFFFu)};
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed),
                                         static_cast<std::uint32_t>(seed >> 32)};
  return philox4x32_10(ctr, key);
}

/// Single uniform in (0,1) for flat index `idx`: lanes packed 4-per-block.
inline double uniform_at(std::uint64_t seed, Phase phase, std::uint32_t subtag,
                         std::uint32_t c0, std::uint32_t c1, std::uint64_t idx) {
  const Block b = draw(seed, phase, subtag, c0, c1, static_cast<std::uint32_t>(idx >> 2));
  return b.u01(static_cast<int>(idx & 3));
}

/// Unbiased integer in [0, bound) via 64-bit multiply-shift.
inline std::uint64_t bounded(std::uint64_t x, std::uint64_t bound) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(x) * bound) >> 64);
}

}  // namespace restocnet::rng

#endif
