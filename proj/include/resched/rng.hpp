#pragma once

#include <cstdint>

namespace resched {

// Counter-based uniform generator. Each (seed, stream) pair addresses an
// independent lazily-evaluated sequence: draw i is a pure function of
// (seed, stream, i), so simulations are bit-reproducible and adding draws
// on one stream never perturbs another.
enum class RngStream : std::uint64_t {
    channel = 1,
    exploration = 2,
    policy_randomization = 3,
};

namespace detail {
// splitmix64 output scramble.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace detail

class CounterRng {
  public:
    CounterRng(std::uint64_t seed, RngStream stream)
        : key_(detail::mix64(seed + 0x9E3779B97F4A7C15ull) ^
               detail::mix64(static_cast<std::uint64_t>(stream) * 0xD1B54A32D192ED03ull)) {}

    std::uint64_t bits(std::uint64_t counter) const {
        return detail::mix64(key_ + (counter + 1) * 0x9E3779B97F4A7C15ull);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform(std::uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

  private:
    std::uint64_t key_;
};

}  // namespace resched
