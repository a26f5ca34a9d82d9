#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace banditseq {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

// Reserved ids shared by every vocabulary.
inline constexpr TokenId kEos = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kUnk = 2;
inline constexpr std::size_t kReservedTokens = 3;

// Drops a single trailing EOS, if present.
inline std::span<const TokenId> strip_eos(std::span<const TokenId> tokens) {
    if (!tokens.empty() && tokens.back() == kEos) {
        return tokens.first(tokens.size() - 1);
    }
    return tokens;
}

} // namespace banditseq
