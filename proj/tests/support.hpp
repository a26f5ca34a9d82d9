// Small helpers shared by the unit tests: seeded generators for property
// tests and a few tiny model fixtures.
#pragma once

#include "banditseq/rng.hpp"
#include "banditseq/seq2seq.hpp"
#include "banditseq/tensor.hpp"
#include "banditseq/tokens.hpp"

#include <cmath>
#include <vector>

namespace testsupport {

using namespace banditseq;

inline TokenSeq random_tokens(Rng& rng, std::size_t min_len, std::size_t max_len, std::size_t lo,
                              std::size_t hi) {
    const std::size_t len = min_len + rng.below(max_len - min_len + 1);
    TokenSeq out(len);
    for (auto& t : out) {
        t = static_cast<TokenId>(lo + rng.below(hi - lo));
    }
    return out;
}

inline Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.values()) {
        v = (2.0 * rng.uniform() - 1.0) * scale;
    }
    return t;
}

inline Seq2SeqConfig tiny_config(std::size_t src_vocab, std::size_t tgt_vocab, std::size_t dim,
                                 Head head = Head::softmax_vocab) {
    Seq2SeqConfig c;
    c.src_vocab_size = src_vocab;
    c.tgt_vocab_size = tgt_vocab;
    c.embed_dim = dim;
    c.hidden_dim = dim;
    c.head = head;
    return c;
}

inline void zero_params(Seq2SeqModel& m) {
    for (auto& e : m.params().entries()) {
        e.value.fill(0.0);
    }
}

// Rescales every weight so that a tiny model has a visibly non-uniform policy.
inline void scale_params(Seq2SeqModel& m, double factor) {
    for (auto& e : m.params().entries()) {
        for (double& v : e.value.values()) {
            v *= factor;
        }
    }
}

} // namespace testsupport
