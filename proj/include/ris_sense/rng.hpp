#pragma once

#include <cstdint>
#include <initializer_list>

#include "ris_sense/tensor.hpp"

namespace ris {

/// Portable pseudo-random generator: xoshiro256** seeded through splitmix64.
///
/// Seeding: s[i] = splitmix64 applied four times to the 64-bit seed, where
///   splitmix64(x): x += 0x9E3779B97F4A7C15;
///                  z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9;
///                  z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
///                  return z ^ (z >> 31)
/// Step:  result = rotl(s1 * 5, 7) * 9;  t = s1 << 17;
///        s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)
/// Doubles in [0,1) take the top 53 bits: (x >> 11) * 2^-53.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept;
    double uniform() noexcept;
    double uniform(double lo, double hi);
    /// Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n);
    /// Standard normal via Box-Muller (one draw per call, no caching).
    double normal() noexcept;
    bool bernoulli(double p) noexcept { return uniform() < p; }

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Sub-seed for a derived stream: folds each key into the seed with
/// h = splitmix64-finalize(h ^ (key + 0x9E3779B97F4A7C15 + (h << 6) + (h >> 2))).
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept;

Tensor rng_uniform(Rng& rng, const Shape& shape, double lo, double hi);

/// Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> shuffled_indices(Rng& rng, std::size_t n);

}  // namespace ris
