#pragma once

#include "banditseq/rng.hpp"
#include "banditseq/tokens.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace banditseq {

// Rounds scores onto the grid {0, 1/g, ..., 1}.
struct Granular {
    int g = 1;
};
// Gaussian rater noise with variance lambda * sigma(s)^2.
struct Variance {
    double lambda = 0.0;
};
// Power transform s^rho: harsh for rho > 1, generous for rho < 1.
struct Skew {
    double rho = 1.0;
};

using Perturbation = std::variant<Granular, Variance, Skew>;

struct RaterConfig {
    std::vector<Perturbation> perturbations; // applied in order; empty = expert
    std::uint64_t noise_seed = 0;

    void validate() const;
    std::string describe() const;
};

double pert_gran(double s, int g);

// Standard deviation of individual human ratings around a mean rating, both
// on the 0-100 scale. Piecewise-linear fit, floored at zero.
double rating_sigma(double s100);

// Unclamped draw: s + sqrt(lambda) * sigma(100 s) / 100 * z.
double pert_var_unclamped(double s, double lambda, Rng& rng);
// Same draw clamped to [0, 1]. lambda == 0 returns s without consuming rng.
double pert_var(double s, double lambda, Rng& rng);

double pert_skew(double s, double rho);

double apply_perturbation(const Perturbation& p, double s, Rng& rng);

// Sentence BLEU of hyp against ref (trailing EOS ignored on both), then the
// configured perturbations. Stochastic perturbations draw from the substream
// Rng(noise_seed).fork(round_index), so replaying a round replays its rating.
double rate(std::span<const TokenId> hyp, std::span<const TokenId> ref, const RaterConfig& config,
            std::uint64_t round_index);

// Un-perturbed expert rating (sentence BLEU score, EOS-stripped).
double expert_rating(std::span<const TokenId> hyp, std::span<const TokenId> ref);

} // namespace banditseq
