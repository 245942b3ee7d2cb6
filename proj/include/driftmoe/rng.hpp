/**
 * Portable deterministic random number generation.
 *
 * The generator is xoshiro256** seeded through SplitMix64. Both algorithms
 * are fully specified integer recurrences, so a given seed produces the same
 * 64-bit sequence on every platform. Real-valued draws are derived from the
 * top 53 bits; Gaussian draws use the Marsaglia polar method.
 */

#ifndef DRIFTMOE_RNG_HPP
#define DRIFTMOE_RNG_HPP

#include <array>
#include <cstdint>

namespace driftmoe {

/// SplitMix64 step. Used for seeding and for deriving child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

    void reseed(std::uint64_t seed) noexcept;

    std::uint64_t next_u64() noexcept;

    /// Uniform in [0, 1).
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [0, n). Unbiased (Lemire's multiply-and-reject). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n) noexcept;

    /// Bernoulli(p).
    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Standard normal draw.
    double gaussian() noexcept;

    /// Child generator: consumes one draw from this generator. The child and
    /// the parent continue as independent, reproducible streams.
    Rng split() noexcept;

    /// Child generator for a named sub-stream of a seed, without consuming
    /// any draws. derive(s, k) is a pure function of (s, k).
    static Rng derive(std::uint64_t seed, std::uint64_t stream) noexcept;

    bool operator==(const Rng&) const = default;

private:
    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace driftmoe

#endif  // DRIFTMOE_RNG_HPP
