#include "banditseq/corpus.hpp"

#include "banditseq/errors.hpp"
#include "banditseq/seq2seq.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace banditseq {

namespace {

constexpr std::array<std::string_view, kReservedTokens> kReservedNames{"<eos>", "<bos>", "<unk>"};

std::vector<std::string> split_whitespace(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> words;
    std::string w;
    while (in >> w) {
        words.push_back(w);
    }
    return words;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(line);
    }
    return lines;
}

void shuffle(std::vector<std::size_t>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace

std::string_view split_name(Split s) {
    switch (s) {
    case Split::supervised:
        return "supervised";
    case Split::bandit:
        return "bandit";
    case Split::dev:
        return "dev";
    case Split::test:
        return "test";
    }
    return "unknown";
}

Split parse_split(std::string_view name) {
    for (std::size_t i = 0; i < kSplitCount; ++i) {
        if (split_name(static_cast<Split>(i)) == name) {
            return static_cast<Split>(i);
        }
    }
    throw ContractViolation("unknown split name: " + std::string(name));
}

Vocab::Vocab() {
    for (std::size_t i = 0; i < kReservedTokens; ++i) {
        tokens_.emplace_back(kReservedNames[i]);
        ids_.emplace(tokens_.back(), static_cast<TokenId>(i));
    }
}

Vocab Vocab::from_tokens(std::span<const std::string> non_reserved) {
    Vocab v;
    for (const auto& t : non_reserved) {
        require(!v.contains(t), "duplicate vocabulary token: " + t);
        v.ids_.emplace(t, static_cast<TokenId>(v.tokens_.size()));
        v.tokens_.push_back(t);
    }
    return v;
}

Vocab Vocab::build(std::span<const std::vector<std::string>> sentences, std::size_t cap) {
    std::map<std::string, std::size_t, std::less<>> freq;
    for (const auto& s : sentences) {
        for (const auto& w : s) {
            if (std::find(kReservedNames.begin(), kReservedNames.end(), w) == kReservedNames.end()) {
                ++freq[w];
            }
        }
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    // freq is already in lexicographic order, so a stable sort by count keeps
    // lexicographic tie-breaking.
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ranked.size() > cap) {
        ranked.resize(cap);
    }
    std::vector<std::string> tokens;
    tokens.reserve(ranked.size());
    for (auto& [w, c] : ranked) {
        tokens.push_back(std::move(w));
    }
    return from_tokens(tokens);
}

TokenId Vocab::id(std::string_view token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return ids_.find(token) != ids_.end(); }

const std::string& Vocab::token(TokenId id) const {
    require(id < tokens_.size(), "token id " + std::to_string(id) + " out of vocabulary range");
    return tokens_[id];
}

TokenSeq Vocab::encode(std::span<const std::string> words) const {
    TokenSeq ids;
    ids.reserve(words.size());
    for (const auto& w : words) {
        ids.push_back(id(w));
    }
    return ids;
}

std::vector<std::string> Vocab::decode(std::span<const TokenId> ids) const {
    std::vector<std::string> words;
    for (TokenId id : ids) {
        if (id == kEos) {
            break;
        }
        words.push_back(token(id));
    }
    return words;
}

void Vocab::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    for (const auto& t : tokens_) {
        out << t << '\n';
    }
}

Vocab Vocab::load(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    require(lines.size() >= kReservedTokens, "vocabulary file " + path.string() + " is too short");
    for (std::size_t i = 0; i < kReservedTokens; ++i) {
        require(lines[i] == kReservedNames[i], "vocabulary file " + path.string() +
                                                   " does not start with the reserved tokens");
    }
    return from_tokens(std::span<const std::string>(lines).subspan(kReservedTokens));
}

std::vector<const SentencePair*> Corpus::split(Split which) const {
    std::vector<const SentencePair*> out;
    for (const auto& p : pairs) {
        if (p.split == which) {
            out.push_back(&p);
        }
    }
    return out;
}

std::array<std::size_t, kSplitCount> Corpus::split_counts() const {
    std::array<std::size_t, kSplitCount> counts{};
    for (const auto& p : pairs) {
        ++counts[static_cast<std::size_t>(p.split)];
    }
    return counts;
}

TokenSeq reverse_blocks(std::span<const TokenId> tokens, std::size_t window) {
    require(window >= 1, "reorder window must be >= 1");
    TokenSeq out(tokens.begin(), tokens.end());
    for (std::size_t start = 0; start < out.size(); start += window) {
        const std::size_t end = std::min(start + window, out.size());
        std::reverse(out.begin() + static_cast<std::ptrdiff_t>(start),
                     out.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

TokenSeq apply_cipher(std::span<const TokenId> source, std::span<const TokenId> cipher,
                      std::size_t reorder_window) {
    TokenSeq mapped;
    mapped.reserve(source.size());
    for (TokenId id : source) {
        require(id < cipher.size(), "apply_cipher: token outside cipher domain");
        mapped.push_back(cipher[id]);
    }
    return reverse_blocks(mapped, reorder_window);
}

CipherCorpus gen_cipher_corpus(const CipherSpec& spec) {
    require(spec.vocab_size >= 4, "cipher vocab_size must be >= 4");
    require(spec.min_length >= 1 && spec.min_length <= spec.max_length &&
                spec.max_length <= kMaxSentenceLength,
            "cipher lengths must satisfy 1 <= min <= max <= 50");
    require(spec.pair_count >= 1, "cipher pair_count must be >= 1");
    require(spec.reorder_window >= 1, "cipher reorder_window must be >= 1");

    Rng root(spec.seed);
    Rng map_rng = root.fork("cipher-map");
    Rng sent_rng = root.fork("sentences");

    std::vector<std::string> src_tokens;
    std::vector<std::string> tgt_tokens;
    for (std::size_t i = 0; i < spec.vocab_size; ++i) {
        src_tokens.push_back("s" + std::to_string(i));
        tgt_tokens.push_back("t" + std::to_string(i));
    }

    CipherCorpus cc;
    cc.spec = spec;
    cc.corpus.source_vocab = Vocab::from_tokens(src_tokens);
    cc.corpus.target_vocab = Vocab::from_tokens(tgt_tokens);

    std::vector<std::size_t> perm(spec.vocab_size);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm, map_rng);
    cc.cipher.assign(kReservedTokens + spec.vocab_size, kUnk);
    cc.cipher[kEos] = kEos;
    cc.cipher[kBos] = kBos;
    for (std::size_t i = 0; i < spec.vocab_size; ++i) {
        cc.cipher[kReservedTokens + i] = static_cast<TokenId>(kReservedTokens + perm[i]);
    }

    const std::size_t span = spec.max_length - spec.min_length + 1;
    cc.corpus.pairs.reserve(spec.pair_count);
    for (std::size_t n = 0; n < spec.pair_count; ++n) {
        const std::size_t len = spec.min_length + sent_rng.below(span);
        TokenSeq src(len);
        for (auto& id : src) {
            id = static_cast<TokenId>(kReservedTokens + sent_rng.below(spec.vocab_size));
        }
        TokenSeq tgt = apply_cipher(src, cc.cipher, spec.reorder_window);
        tgt.push_back(kEos);
        cc.corpus.pairs.push_back(SentencePair{std::move(src), std::move(tgt), Split::supervised});
    }
    split_corpus(cc.corpus, spec.fractions, root.fork("split").seed());

    // Keep the test split disjoint: a test pair whose source also occurs
    // elsewhere trades labels with the next non-test pair whose source is
    // unique. Split counts are unchanged.
    std::map<TokenSeq, std::size_t> occurrences;
    for (const auto& p : cc.corpus.pairs) {
        ++occurrences[p.source];
    }
    std::size_t donor = 0;
    for (auto& p : cc.corpus.pairs) {
        if (p.split != Split::test || occurrences[p.source] == 1) {
            continue;
        }
        auto& pairs = cc.corpus.pairs;
        while (donor < pairs.size() &&
               (pairs[donor].split == Split::test || occurrences[pairs[donor].source] != 1)) {
            ++donor;
        }
        require(donor < pairs.size(), "cipher corpus has too few distinct sources for a disjoint test split");
        std::swap(p.split, pairs[donor].split);
    }
    return cc;
}

Corpus load_parallel_text(const std::filesystem::path& source_path,
                          const std::filesystem::path& target_path, std::size_t vocab_cap) {
    const auto src_lines = read_lines(source_path);
    const auto tgt_lines = read_lines(target_path);
    if (src_lines.size() != tgt_lines.size()) {
        throw ContractViolation("parallel files differ in length: " + source_path.string() + " has " +
                                std::to_string(src_lines.size()) + " lines, " + target_path.string() +
                                " has " + std::to_string(tgt_lines.size()));
    }
    std::vector<std::vector<std::string>> src_words;
    std::vector<std::vector<std::string>> tgt_words;
    Corpus corpus;
    for (std::size_t i = 0; i < src_lines.size(); ++i) {
        auto s = split_whitespace(src_lines[i]);
        auto t = split_whitespace(tgt_lines[i]);
        if (s.empty() || t.empty() || s.size() > kMaxSentenceLength ||
            t.size() > kMaxSentenceLength) {
            ++corpus.dropped;
            continue;
        }
        src_words.push_back(std::move(s));
        tgt_words.push_back(std::move(t));
    }
    corpus.source_vocab = Vocab::build(src_words, vocab_cap);
    corpus.target_vocab = Vocab::build(tgt_words, vocab_cap);
    for (std::size_t i = 0; i < src_words.size(); ++i) {
        SentencePair p;
        p.source = corpus.source_vocab.encode(src_words[i]);
        p.target = corpus.target_vocab.encode(tgt_words[i]);
        p.target.push_back(kEos);
        corpus.pairs.push_back(std::move(p));
    }
    return corpus;
}

void split_corpus(Corpus& corpus, std::span<const double> fractions, std::uint64_t seed) {
    require(fractions.size() == kSplitCount, "split_corpus needs four fractions");
    double total = 0.0;
    for (double f : fractions) {
        require(f >= 0.0, "split fractions must be nonnegative");
        total += f;
    }
    require(std::abs(total - 1.0) <= 1e-9, "split fractions must sum to 1");

    const std::size_t n = corpus.pairs.size();
    std::array<std::size_t, kSplitCount> counts{};
    std::array<double, kSplitCount> remainders{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < kSplitCount; ++i) {
        const double exact = fractions[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainders[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    std::array<std::size_t, kSplitCount> order{0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
    for (std::size_t k = 0; assigned < n; ++k) {
        ++counts[order[k % kSplitCount]];
        ++assigned;
    }

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    shuffle(idx, rng);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < kSplitCount; ++s) {
        for (std::size_t k = 0; k < counts[s]; ++k) {
            corpus.pairs[idx[pos++]].split = static_cast<Split>(s);
        }
    }
}

void save_cipher_corpus(const CipherCorpus& cc, const std::filesystem::path& prefix) {
    const auto with_suffix = [&](const char* suffix) {
        return std::filesystem::path(prefix.string() + suffix);
    };
    if (prefix.has_parent_path()) {
        std::filesystem::create_directories(prefix.parent_path());
    }
    std::ofstream src(with_suffix(".src"));
    std::ofstream tgt(with_suffix(".tgt"));
    if (!src || !tgt) {
        throw IoError("cannot write corpus files under " + prefix.string());
    }
    const Corpus& c = cc.corpus;
    nlohmann::json splits = nlohmann::json::array();
    for (const auto& p : c.pairs) {
        const auto sw = c.source_vocab.decode(p.source);
        const auto tw = c.target_vocab.decode(p.target);
        for (std::size_t i = 0; i < sw.size(); ++i) {
            src << (i ? " " : "") << sw[i];
        }
        src << '\n';
        for (std::size_t i = 0; i < tw.size(); ++i) {
            tgt << (i ? " " : "") << tw[i];
        }
        tgt << '\n';
        splits.push_back(split_name(p.split));
    }
    c.source_vocab.save(with_suffix(".src.vocab"));
    c.target_vocab.save(with_suffix(".tgt.vocab"));

    nlohmann::json meta;
    meta["seed"] = cc.spec.seed;
    meta["vocab_size"] = cc.spec.vocab_size;
    meta["min_length"] = cc.spec.min_length;
    meta["max_length"] = cc.spec.max_length;
    meta["pair_count"] = cc.spec.pair_count;
    meta["reorder_window"] = cc.spec.reorder_window;
    meta["fractions"] = cc.spec.fractions;
    nlohmann::json cipher = nlohmann::json::object();
    for (std::size_t i = kReservedTokens; i < cc.cipher.size(); ++i) {
        cipher[c.source_vocab.token(static_cast<TokenId>(i))] =
            c.target_vocab.token(cc.cipher[i]);
    }
    meta["cipher"] = cipher;
    meta["splits"] = splits;
    std::ofstream out(with_suffix(".meta.json"));
    if (!out) {
        throw IoError("cannot write " + with_suffix(".meta.json").string());
    }
    out << meta.dump(2) << '\n';
}

} // namespace banditseq
