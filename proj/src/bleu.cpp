#include "banditseq/bleu.hpp"

#include "banditseq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace banditseq {

namespace {

struct NgramStats {
    std::array<std::size_t, kBleuOrder> matches{};
    std::array<std::size_t, kBleuOrder> candidates{};
};

using NgramCounts = std::map<std::vector<TokenId>, std::size_t>;

NgramCounts count_ngrams(std::span<const TokenId> tokens, std::size_t n) {
    NgramCounts counts;
    if (tokens.size() < n) {
        return counts;
    }
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++counts[std::vector<TokenId>(tokens.begin() + i, tokens.begin() + i + n)];
    }
    return counts;
}

NgramStats clipped_stats(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
    NgramStats stats;
    for (std::size_t n = 1; n <= kBleuOrder; ++n) {
        const NgramCounts h = count_ngrams(hyp, n);
        const NgramCounts r = count_ngrams(ref, n);
        std::size_t matched = 0;
        for (const auto& [gram, count] : h) {
            auto it = r.find(gram);
            if (it != r.end()) {
                matched += std::min(count, it->second);
            }
        }
        stats.matches[n - 1] = matched;
        stats.candidates[n - 1] = hyp.size() >= n ? hyp.size() - n + 1 : 0;
    }
    return stats;
}

} // namespace

BleuBreakdown sentence_bleu(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
    require(!ref.empty(), "sentence_bleu: empty reference");
    BleuBreakdown out;
    out.hyp_length = hyp.size();
    out.ref_length = ref.size();
    const double c1 = static_cast<double>(hyp.size()) + 1.0;
    const double r1 = static_cast<double>(ref.size()) + 1.0;
    out.brevity_penalty = c1 >= r1 ? 1.0 : std::exp(1.0 - r1 / c1);
    if (hyp.empty()) {
        return out;
    }

    const NgramStats stats = clipped_stats(hyp, ref);
    out.precision[0] =
        static_cast<double>(stats.matches[0]) / static_cast<double>(stats.candidates[0]);
    for (std::size_t n = 1; n < kBleuOrder; ++n) {
        out.precision[n] = (static_cast<double>(stats.matches[n]) + 1.0) /
                           (static_cast<double>(stats.candidates[n]) + 1.0);
    }
    if (stats.matches[0] == 0) {
        return out;
    }
    double log_sum = 0.0;
    for (double p : out.precision) {
        log_sum += std::log(p);
    }
    out.score = out.brevity_penalty * std::exp(log_sum / static_cast<double>(kBleuOrder));
    return out;
}

double corpus_bleu(std::span<const TokenSeq> hyps, std::span<const TokenSeq> refs) {
    require(hyps.size() == refs.size(), "corpus_bleu: " + std::to_string(hyps.size()) +
                                            " hypotheses vs " + std::to_string(refs.size()) +
                                            " references");
    NgramStats total;
    std::size_t hyp_len = 0;
    std::size_t ref_len = 0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        require(!refs[i].empty(), "corpus_bleu: empty reference at line " + std::to_string(i));
        const NgramStats s = clipped_stats(hyps[i], refs[i]);
        for (std::size_t n = 0; n < kBleuOrder; ++n) {
            total.matches[n] += s.matches[n];
            total.candidates[n] += s.candidates[n];
        }
        hyp_len += hyps[i].size();
        ref_len += refs[i].size();
    }
    if (hyp_len == 0) {
        return 0.0;
    }
    double log_sum = 0.0;
    for (std::size_t n = 0; n < kBleuOrder; ++n) {
        if (total.matches[n] == 0) {
            return 0.0;
        }
        log_sum += std::log(static_cast<double>(total.matches[n]) /
                            static_cast<double>(total.candidates[n]));
    }
    const double c = static_cast<double>(hyp_len);
    const double r = static_cast<double>(ref_len);
    const double bp = std::min(1.0, std::exp(1.0 - r / c));
    return bp * std::exp(log_sum / static_cast<double>(kBleuOrder));
}

} // namespace banditseq
