#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

#include "errors.hpp"
#include "linalg.hpp"

namespace bilstm_ae {

/// SplitMix64 step. Used to expand a 64-bit seed into generator state and to derive sub-seeds.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Mixes two 64-bit values into one seed (e.g. base seed and epoch number).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t s = seed ^ (stream * 0xd1b54a32d192ed03ULL);
    splitmix64(s);
    return splitmix64(s);
}

/**
 * xoshiro256** generator seeded through SplitMix64.
 *
 * Every derived draw (uniform doubles, bounded integers, normals, shuffles) is
 * written out here instead of going through <random> distributions, whose
 * outputs are implementation defined. The same seed therefore gives the same
 * sequence on every platform and in any other language that follows the
 * recurrence documented in docs/rng.md.
 *
 * Single owner: do not share one instance between threads.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {
        std::uint64_t sm = seed;
        for (auto& s : state_) s = splitmix64(sm);
    }

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 bits of precision.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw ArgumentError("Rng::below: n must be positive");
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via the Box-Muller transform; one draw per call, two uniforms consumed.
    double normal() noexcept {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

    /// Fisher-Yates, walking from the back.
    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_;
    std::uint64_t state_[4]{};
};

/// Glorot/Xavier uniform initializer. Returns a fan_out x fan_in matrix.
inline Matrix glorot_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
    if (fan_in == 0 || fan_out == 0) throw ArgumentError("glorot_uniform: fan_in and fan_out must be >= 1");
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix m(fan_out, fan_in);
    for (double& v : m.data()) v = rng.uniform(-limit, limit);
    return m;
}

} // namespace bilstm_ae
