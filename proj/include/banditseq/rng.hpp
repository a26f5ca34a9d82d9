#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace banditseq {

// xoshiro256** seeded through splitmix64. Every draw is defined in terms of
// 64-bit integer arithmetic, so a seed produces the same stream on every
// platform. fork() derives an independent generator from the seed this
// generator was created with (not from its current position), so substreams
// can be requested in any order.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();

    // Uniform on [0, 1) with 53 bits of resolution.
    double uniform();
    // Standard normal via Box-Muller; consumes two uniforms per draw.
    double normal();
    // Index drawn with probability proportional to weights[i]; weights need
    // not be normalized but must be nonnegative with a positive sum.
    std::size_t categorical(std::span<const double> weights);
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    Rng fork(std::string_view label) const;
    Rng fork(std::uint64_t index) const;

    std::uint64_t seed() const { return seed_; }

  private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(std::string_view text);

} // namespace banditseq
