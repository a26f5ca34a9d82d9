#include "banditseq/rater.hpp"

#include "banditseq/bleu.hpp"
#include "banditseq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace banditseq {

namespace {

// Absorbs representation error in g * s so that decimal bin boundaries such as
// 0.1 and 0.7 at g = 5 land in the upper bin.
constexpr double kRoundingSlack = 1e-9;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

} // namespace

void RaterConfig::validate() const {
    for (const auto& p : perturbations) {
        std::visit(overloaded{
                       [](const Granular& x) { require(x.g >= 1, "granularity g must be >= 1"); },
                       [](const Variance& x) {
                           require(x.lambda >= 0.0 && std::isfinite(x.lambda),
                                   "variance scale lambda must be >= 0");
                       },
                       [](const Skew& x) {
                           require(x.rho > 0.0 && std::isfinite(x.rho), "skew rho must be > 0");
                       },
                   },
                   p);
    }
}

std::string RaterConfig::describe() const {
    if (perturbations.empty()) {
        return "expert";
    }
    std::string out;
    char buf[64];
    for (const auto& p : perturbations) {
        if (!out.empty()) {
            out += "+";
        }
        std::visit(overloaded{
                       [&](const Granular& x) { std::snprintf(buf, sizeof buf, "gran(g=%d)", x.g); },
                       [&](const Variance& x) {
                           std::snprintf(buf, sizeof buf, "var(lambda=%g)", x.lambda);
                       },
                       [&](const Skew& x) { std::snprintf(buf, sizeof buf, "skew(rho=%g)", x.rho); },
                   },
                   p);
        out += buf;
    }
    return out;
}

double pert_gran(double s, int g) {
    require(s >= 0.0 && s <= 1.0, "pert_gran: score must be in [0,1]");
    require(g >= 1, "pert_gran: g must be >= 1");
    const double gd = static_cast<double>(g);
    const double bin = std::clamp(std::floor(gd * s + 0.5 + kRoundingSlack), 0.0, gd);
    return bin / gd;
}

double rating_sigma(double s100) {
    require(s100 >= 0.0 && s100 <= 100.0, "rating_sigma: score must be in [0,100]");
    const double sigma = s100 < 50.0 ? 0.64 * s100 - 0.02 : -0.67 * s100 + 67.0;
    return std::max(sigma, 0.0);
}

double pert_var_unclamped(double s, double lambda, Rng& rng) {
    require(s >= 0.0 && s <= 1.0, "pert_var: score must be in [0,1]");
    require(lambda >= 0.0, "pert_var: lambda must be >= 0");
    if (lambda == 0.0) {
        return s;
    }
    const double sd = std::sqrt(lambda) * rating_sigma(100.0 * s) / 100.0;
    return s + sd * rng.normal();
}

double pert_var(double s, double lambda, Rng& rng) {
    return std::clamp(pert_var_unclamped(s, lambda, rng), 0.0, 1.0);
}

double pert_skew(double s, double rho) {
    require(s >= 0.0 && s <= 1.0, "pert_skew: score must be in [0,1]");
    require(rho > 0.0, "pert_skew: rho must be > 0");
    return std::pow(s, rho);
}

double apply_perturbation(const Perturbation& p, double s, Rng& rng) {
    return std::visit(overloaded{
                          [&](const Granular& x) { return pert_gran(s, x.g); },
                          [&](const Variance& x) { return pert_var(s, x.lambda, rng); },
                          [&](const Skew& x) { return pert_skew(s, x.rho); },
                      },
                      p);
}

double expert_rating(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
    return sentence_bleu(strip_eos(hyp), strip_eos(ref)).score;
}

double rate(std::span<const TokenId> hyp, std::span<const TokenId> ref, const RaterConfig& config,
            std::uint64_t round_index) {
    double s = expert_rating(hyp, ref);
    if (config.perturbations.empty()) {
        return s;
    }
    Rng noise = Rng(config.noise_seed).fork(round_index);
    for (const auto& p : config.perturbations) {
        s = apply_perturbation(p, s, noise);
    }
    return s;
}

} // namespace banditseq
