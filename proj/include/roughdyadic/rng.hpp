#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace roughdyadic {

// Counter-based pseudorandom source: SplitMix64 evaluated in counter mode.
// The value at position i of the stream with key s is the SplitMix64 output
// for internal state s + (i+1)*GOLDEN, i.e. the i-th draw of a standard
// splitmix64 sequence seeded with s, reachable in O(1) for any i. Normal
// variates use the Box-Muller transform on two consecutive counters, so any
// draw is addressable without generating its predecessors. Reproducibility is
// bit-exact for a fixed build; no cross-language contract is made.

namespace detail {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// i-th 64-bit word of the stream identified by key.
inline std::uint64_t counter_u64(std::uint64_t key, std::uint64_t i) {
    return detail::mix64(key + (i + 1) * detail::kGolden);
}

/// Derive a sub-stream key (e.g. per sample index) from a master seed.
inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
    return detail::mix64(seed ^ detail::mix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Uniform in (0,1): (k + 0.5) / 2^53 from the top 53 bits, never 0 or 1.
inline double counter_unit(std::uint64_t key, std::uint64_t i) {
    return (static_cast<double>(counter_u64(key, i) >> 11) + 0.5) * 0x1.0p-53;
}

struct NormalPair {
    double z0, z1;
};

/// Two independent N(0,1) draws from counters {2j, 2j+1} via Box-Muller.
inline NormalPair normal_pair(std::uint64_t key, std::uint64_t j) {
    const double u1 = counter_unit(key, 2 * j);
    const double u2 = counter_unit(key, 2 * j + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(a), r * std::sin(a)};
}

/// Single N(0,1) at pair index j (first component of the pair).
inline double normal_at(std::uint64_t key, std::uint64_t j) { return normal_pair(key, j).z0; }

/// Sequential convenience wrapper over the counter stream.
class Rng {
  public:
    explicit Rng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return counter_u64(key_, ctr_++); }
    double next_unit() { return counter_unit(key_, ctr_++); }

    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const std::uint64_t j = ctr_;
        ctr_ += 2;
        const double u1 = counter_unit(key_, j);
        const double u2 = counter_unit(key_, j + 1);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace roughdyadic
