#pragma once

#include "banditseq/rng.hpp"
#include "banditseq/tokens.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace banditseq {

enum class Split : std::uint8_t { supervised = 0, bandit = 1, dev = 2, test = 3 };
inline constexpr std::size_t kSplitCount = 4;

std::string_view split_name(Split s);
Split parse_split(std::string_view name);

// Token string <-> id bijection. Ids 0, 1, 2 are always <eos>, <bos>, <unk>.
class Vocab {
  public:
    Vocab();

    // Frequency-ranked, ties broken lexicographically, at most cap non-reserved
    // entries. Reserved token strings in the input are not counted.
    static Vocab build(std::span<const std::vector<std::string>> sentences, std::size_t cap);
    static Vocab from_tokens(std::span<const std::string> non_reserved);

    std::size_t size() const { return tokens_.size(); }
    TokenId id(std::string_view token) const; // kUnk when absent
    bool contains(std::string_view token) const;
    const std::string& token(TokenId id) const;
    std::span<const std::string> tokens() const { return tokens_; }

    TokenSeq encode(std::span<const std::string> words) const;
    std::vector<std::string> decode(std::span<const TokenId> ids) const; // stops at EOS

    // One token per line, line number = id.
    void save(const std::filesystem::path& path) const;
    static Vocab load(const std::filesystem::path& path);

  private:
    std::vector<std::string> tokens_;
    std::map<std::string, TokenId, std::less<>> ids_;
};

struct SentencePair {
    TokenSeq source; // no EOS
    TokenSeq target; // ends with EOS
    Split split = Split::supervised;
};

struct Corpus {
    Vocab source_vocab;
    Vocab target_vocab;
    std::vector<SentencePair> pairs;
    std::size_t dropped = 0; // pairs removed during ingestion

    std::vector<const SentencePair*> split(Split which) const;
    std::array<std::size_t, kSplitCount> split_counts() const;
};

struct CipherSpec {
    std::size_t vocab_size = 20; // content tokens per side, excluding reserved ids
    std::size_t min_length = 3;
    std::size_t max_length = 12;
    std::size_t pair_count = 2000;
    std::size_t reorder_window = 3;
    std::uint64_t seed = 1;
    std::array<double, kSplitCount> fractions{0.6, 0.25, 0.075, 0.075};
};

// Synthetic translation task: each source token maps through a fixed random
// bijection, then every consecutive block of reorder_window target tokens is
// reversed (adjacent swaps for a window of 2). Source vocabulary is s0..s{V-1},
// target vocabulary t0..t{V-1}.
struct CipherCorpus {
    Corpus corpus;
    std::vector<TokenId> cipher; // cipher[source id] = target id
    CipherSpec spec;
};

CipherCorpus gen_cipher_corpus(const CipherSpec& spec);

// Applies the cipher transform to a source sentence (no EOS appended).
TokenSeq apply_cipher(std::span<const TokenId> source, std::span<const TokenId> cipher,
                      std::size_t reorder_window);

// Reverses each consecutive block of `window` tokens; its own inverse.
TokenSeq reverse_blocks(std::span<const TokenId> tokens, std::size_t window);

// Line-aligned, whitespace-tokenized parallel files. Empty lines and pairs with
// either side longer than 50 tokens are dropped and counted in Corpus::dropped.
// All pairs are labeled supervised; call split_corpus afterwards.
Corpus load_parallel_text(const std::filesystem::path& source_path,
                          const std::filesystem::path& target_path, std::size_t vocab_cap);

// Deterministic shuffled assignment of split labels; each split's count is
// within one of fraction * N (largest-remainder rounding).
void split_corpus(Corpus& corpus, std::span<const double> fractions, std::uint64_t seed);

// Writes <prefix>.src, <prefix>.tgt, <prefix>.src.vocab, <prefix>.tgt.vocab and
// <prefix>.meta.json (seed, cipher map, split assignment).
void save_cipher_corpus(const CipherCorpus& cc, const std::filesystem::path& prefix);

} // namespace banditseq
