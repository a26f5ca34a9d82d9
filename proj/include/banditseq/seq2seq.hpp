#pragma once

#include "banditseq/autodiff.hpp"
#include "banditseq/param_store.hpp"
#include "banditseq/rng.hpp"
#include "banditseq/tokens.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace banditseq {

enum class Head {
    softmax_vocab, // translation policy: softmax over the target vocabulary
    scalar_value,  // critic: one scalar w^T h~ per decoder step
};

struct Seq2SeqConfig {
    std::size_t src_vocab_size = 0;
    std::size_t tgt_vocab_size = 0;
    std::size_t embed_dim = 32;
    std::size_t hidden_dim = 32;
    // 0 selects the per-sentence default 2 * len(x) + 5.
    std::size_t max_decode_len = 0;
    Head head = Head::softmax_vocab;

    void validate() const;
    std::size_t decode_limit(std::size_t source_length) const;
};

inline constexpr std::size_t kMaxSentenceLength = 50;

// Uniform [-0.1, 0.1] weights, zero biases, forget-gate biases 1.0.
ParamStore init_params(const Seq2SeqConfig& config, Rng& rng);

// Bound parameter nodes plus the encoder outputs for one source sentence.
struct Encoding {
    Var memory;  // [src_len, hidden]: one encoder hidden state per source token
    Var keys;    // [src_len, hidden]: row i is W_a * memory_i
    Var summary; // final encoder hidden state, the decoder's initial hidden
    std::size_t length = 0;

    Var dec_embed, dec_w, dec_b, out_w, head_w;
};

struct DecoderState {
    Var hidden;
    Var cell;
    Var feed; // previous attentional output vector (input feeding)
};

struct StepOutput {
    Var attention;   // weights over source positions
    Var attentional; // tanh(W_o [h_t ; c_t])
    Var log_probs;   // softmax_vocab head only
    Var value;       // scalar_value head only
    std::vector<double> probs; // exp(log_probs), softmax_vocab head only
    DecoderState next;
};

struct SampledTranslation {
    TokenSeq tokens;                // ends with EOS unless the length cap hit first
    std::vector<double> log_probs;  // log P(y_t | y_<t, x) of each drawn token
    std::vector<Var> log_prob_vars; // same values as tape nodes, for backward()
};

// Unidirectional single-layer LSTM encoder-decoder with general (bilinear)
// global attention and input feeding. The same class serves as the critic
// when configured with Head::scalar_value.
//
// Forward passes bind parameters on the caller's tape; calling backward() on
// that tape accumulates into this model's ParamStore gradients.
class Seq2SeqModel {
  public:
    Seq2SeqModel(Seq2SeqConfig config, ParamStore params);
    static Seq2SeqModel create(Seq2SeqConfig config, Rng& rng);

    const Seq2SeqConfig& config() const { return config_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    Encoding encode(Tape& tape, std::span<const TokenId> source) const;
    DecoderState initial_state(Tape& tape, const Encoding& enc) const;
    StepOutput decode_step(Tape& tape, const Encoding& enc, const DecoderState& state,
                           TokenId prev_token) const;

    // Teacher-forced log P(y_t | y_<t, x) for each given token; the sequence
    // need not end with EOS.
    std::vector<Var> token_log_probs(Tape& tape, std::span<const TokenId> source,
                                     std::span<const TokenId> tokens) const;

    // Teacher-forced sum of log-probabilities; target must end with EOS.
    Var sequence_log_prob(Tape& tape, std::span<const TokenId> source,
                          std::span<const TokenId> target) const;
    double sequence_log_prob(std::span<const TokenId> source, std::span<const TokenId> target) const;

    // Ancestral sample; max_len 0 means config().decode_limit(len(source)).
    SampledTranslation sample(Tape& tape, std::span<const TokenId> source, Rng& rng,
                              std::size_t max_len = 0) const;

    // Argmax decoding, ties to the lowest token id.
    TokenSeq greedy_decode(std::span<const TokenId> source, std::size_t max_len = 0) const;

    // Scalar head: one value per target position, V(y_<t) for t = 1..m. The
    // first step consumes BOS.
    std::vector<Var> prefix_values(Tape& tape, std::span<const TokenId> source,
                                   std::span<const TokenId> target) const;
    std::vector<double> prefix_values(std::span<const TokenId> source,
                                      std::span<const TokenId> target) const;

  private:
    Var bind(Tape& tape, const char* name) const;

    Seq2SeqConfig config_;
    ParamStore params_;
};

} // namespace banditseq
