#include "banditseq/rng.hpp"

#include "banditseq/errors.hpp"

#include <cmath>
#include <numbers>

namespace banditseq {

namespace {

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t state = seed ^ (salt * 0xD1B54A32D192ED03ULL);
    splitmix64(state);
    return splitmix64(state);
}

} // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t state = seed;
    for (auto& s : s_) {
        s = splitmix64(state);
    }
}

std::uint64_t Rng::next() {
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

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::categorical(std::span<const double> weights) {
    require(!weights.empty(), "categorical needs at least one weight");
    double total = 0.0;
    for (double w : weights) {
        require(w >= 0.0, "categorical weights must be nonnegative");
        total += w;
    }
    require(total > 0.0, "categorical weights must have a positive sum");
    const double u = uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] > 0.0) {
            last_positive = i;
        }
        acc += weights[i];
        if (u < acc) {
            return i;
        }
    }
    return last_positive;
}

std::uint64_t Rng::below(std::uint64_t n) {
    require(n > 0, "below() needs a positive bound");
    // Rejection keeps the draw exactly uniform.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next();
    while (x >= limit) {
        x = next();
    }
    return x % n;
}

Rng Rng::fork(std::string_view label) const { return Rng(derive(seed_, fnv1a64(label))); }

Rng Rng::fork(std::uint64_t index) const { return Rng(derive(seed_ ^ 0x6A09E667F3BCC909ULL, index)); }

} // namespace banditseq
