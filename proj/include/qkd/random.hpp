#pragma once

#include <cstdint>
#include <limits>

namespace qkd {

/// Counter-based, splittable pseudo-random source.
///
/// Draw n of a stream is a pure function of (key, n): the SplitMix64
/// finalizer applied to key + (n + 1) * golden_gamma. `split(i)` derives an
/// independent child stream keyed by the parent key and i, so work items
/// indexed by i get the same numbers whatever order they run in.
///
/// Satisfies UniformRandomBitGenerator, but the helpers below are preferred
/// over <random> distributions whose output differs between standard
/// libraries.
class CounterRng {
  public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed = 0) noexcept : key_(mix(seed ^ kSeedSalt)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return next(); }

    result_type next() noexcept {
        ++counter_;
        return mix(key_ + counter_ * kGamma);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), n >= 1. Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t x = next();
        while (x >= limit) {
            x = next();
        }
        return x % n;
    }

    /// Independent child stream. Does not advance this stream.
    [[nodiscard]] CounterRng split(std::uint64_t stream) const noexcept {
        CounterRng child;
        child.key_ = mix(key_ ^ mix(stream + kSplitSalt));
        child.counter_ = 0;
        return child;
    }

    [[nodiscard]] std::uint64_t draws() const noexcept { return counter_; }

  private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t kSeedSalt = 0x6A09E667F3BCC909ULL;
    static constexpr std::uint64_t kSplitSalt = 0xBB67AE8584CAA73BULL;

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace qkd
