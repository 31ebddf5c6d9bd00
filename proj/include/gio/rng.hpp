#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>

namespace gio {

// SplitMix64, used only to expand a 64-bit seed into xoshiro state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic stream generator: xoshiro256** seeded through SplitMix64.
/// Identical seed gives an identical stream on every platform; all sampling
/// in the library goes through this type so runs are reproducible bit for bit.
class SeededRng {
public:
    using result_type = std::uint64_t;

    explicit SeededRng(std::uint64_t seed = 0) : seed_(seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    std::uint64_t seed() const noexcept { return seed_; }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("SeededRng::below: n == 0");
        // rejection sampling to avoid modulo bias
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t x;
        do {
            x = (*this)();
        } while (x >= limit);
        return x % n;
    }

    /// Sample an index from an (unnormalized is not allowed) probability row.
    /// Falls back to the last positive entry if rounding pushes u past the CDF.
    int categorical(std::span<const double> probs) {
        const double u = uniform();
        double cdf = 0.0;
        int last_positive = -1;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (probs[i] <= 0.0) continue;
            last_positive = static_cast<int>(i);
            cdf += probs[i];
            if (u < cdf) return static_cast<int>(i);
        }
        if (last_positive < 0)
            throw std::invalid_argument("SeededRng::categorical: all-zero row");
        return last_positive;
    }

    /// Independent stream for a parallel run: seed xor run-index, scrambled
    /// through SplitMix64.
    SeededRng derive(std::uint64_t run_index) const {
        std::uint64_t sm = seed_ ^ run_index;
        return SeededRng(splitmix64(sm));
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t seed_;
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace gio
