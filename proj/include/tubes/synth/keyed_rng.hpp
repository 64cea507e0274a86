#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tubes::synth {

/// Counter-based deterministic generator. All draws are keyed by
/// (seed, stream, entity, frame), so generation order never matters and the
/// same config reproduces the same dataset bit for bit on any platform.
class KeyedRng {
public:
    KeyedRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t entity = 0,
             std::uint64_t frame = 0) {
        state_ = absorb(0x9e3779b97f4a7c15ull, seed);
        state_ = absorb(state_, stream);
        state_ = absorb(state_, entity);
        state_ = absorb(state_, frame);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    /// Standard normal via Box-Muller; draws exactly two uniforms.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

private:
    static std::uint64_t absorb(std::uint64_t state, std::uint64_t value) {
        std::uint64_t z = state ^ (value + 0x9e3779b97f4a7c15ull + (state << 6) + (state >> 2));
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_ = 0;
};

}  // namespace tubes::synth
