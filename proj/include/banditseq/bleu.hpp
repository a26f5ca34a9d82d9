#pragma once

#include "banditseq/tokens.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace banditseq {

inline constexpr std::size_t kBleuOrder = 4;

struct BleuBreakdown {
    std::array<double, kBleuOrder> precision{}; // p_1 .. p_4
    std::size_t hyp_length = 0;
    std::size_t ref_length = 0;
    double brevity_penalty = 0.0;
    double score = 0.0;
};

// Smoothed sentence-level BLEU-4: p_1 unsmoothed, p_n = (m_n + 1) / (c_n + 1)
// for n >= 2, and the brevity penalty computed on lengths plus one. An empty
// hypothesis or zero unigram precision scores 0.
BleuBreakdown sentence_bleu(std::span<const TokenId> hyp, std::span<const TokenId> ref);

// Standard unsmoothed corpus BLEU-4 over pooled clipped counts.
double corpus_bleu(std::span<const TokenSeq> hyps, std::span<const TokenSeq> refs);

} // namespace banditseq
