#include "banditseq/seq2seq.hpp"

#include "banditseq/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace banditseq {

namespace {

constexpr double kInitRange = 0.1;

Tensor uniform_tensor(std::vector<std::size_t> shape, Rng& rng) {
    Tensor t(std::move(shape), 0.0);
    for (double& v : t.values()) {
        v = (2.0 * rng.uniform() - 1.0) * kInitRange;
    }
    return t;
}

Tensor lstm_bias(std::size_t hidden) {
    Tensor b({4 * hidden}, 0.0);
    for (std::size_t k = hidden; k < 2 * hidden; ++k) {
        b[k] = 1.0;
    }
    return b;
}

struct LstmOut {
    Var hidden;
    Var cell;
};

// Gate rows are laid out [input; forget; candidate; output].
LstmOut lstm_cell(Var w, Var b, std::span<const Var> inputs, Var cell, std::size_t hidden) {
    Var z = add(matvec(w, concat(inputs)), b);
    Var i = sigmoid(slice(z, 0, hidden));
    Var f = sigmoid(slice(z, hidden, hidden));
    Var g = tanh(slice(z, 2 * hidden, hidden));
    Var o = sigmoid(slice(z, 3 * hidden, hidden));
    Var c = add(mul(f, cell), mul(i, g));
    Var h = mul(o, tanh(c));
    return {h, c};
}

} // namespace

void Seq2SeqConfig::validate() const {
    require(src_vocab_size >= 1 && tgt_vocab_size >= 1, "vocabulary sizes must be >= 1");
    require(embed_dim >= 1 && hidden_dim >= 1, "embedding and hidden sizes must be >= 1");
}

std::size_t Seq2SeqConfig::decode_limit(std::size_t source_length) const {
    return max_decode_len > 0 ? max_decode_len : 2 * source_length + 5;
}

ParamStore init_params(const Seq2SeqConfig& config, Rng& rng) {
    config.validate();
    const std::size_t e = config.embed_dim;
    const std::size_t h = config.hidden_dim;
    ParamStore p;
    p.add("enc.embed", uniform_tensor({config.src_vocab_size, e}, rng));
    p.add("enc.lstm.W", uniform_tensor({4 * h, e + h}, rng));
    p.add("enc.lstm.b", lstm_bias(h));
    p.add("dec.embed", uniform_tensor({config.tgt_vocab_size, e}, rng));
    p.add("dec.lstm.W", uniform_tensor({4 * h, h + e + h}, rng));
    p.add("dec.lstm.b", lstm_bias(h));
    p.add("attn.W", uniform_tensor({h, h}, rng));
    p.add("out.W", uniform_tensor({h, 2 * h}, rng));
    if (config.head == Head::softmax_vocab) {
        p.add("head.W", uniform_tensor({config.tgt_vocab_size, h}, rng));
    } else {
        p.add("head.w", uniform_tensor({h}, rng));
    }
    return p;
}

Seq2SeqModel::Seq2SeqModel(Seq2SeqConfig config, ParamStore params)
    : config_(config), params_(std::move(params)) {
    config_.validate();
    const std::size_t e = config_.embed_dim;
    const std::size_t h = config_.hidden_dim;
    auto check = [&](const char* name, std::vector<std::size_t> shape) {
        require(params_.contains(name), std::string("missing parameter ") + name);
        require(params_.at(name).value.shape() == shape,
                std::string("parameter ") + name + " has shape " +
                    params_.at(name).value.shape_string());
    };
    check("enc.embed", {config_.src_vocab_size, e});
    check("enc.lstm.W", {4 * h, e + h});
    check("enc.lstm.b", {4 * h});
    check("dec.embed", {config_.tgt_vocab_size, e});
    check("dec.lstm.W", {4 * h, h + e + h});
    check("dec.lstm.b", {4 * h});
    check("attn.W", {h, h});
    check("out.W", {h, 2 * h});
    if (config_.head == Head::softmax_vocab) {
        check("head.W", {config_.tgt_vocab_size, h});
    } else {
        check("head.w", {h});
    }
}

Seq2SeqModel Seq2SeqModel::create(Seq2SeqConfig config, Rng& rng) {
    ParamStore p = init_params(config, rng);
    return Seq2SeqModel(config, std::move(p));
}

Var Seq2SeqModel::bind(Tape& tape, const char* name) const {
    // Forward passes only read values; backward() writes gradients, which is
    // the documented mutation of this model's store.
    return tape.param(const_cast<ParamStore&>(params_).at(name));
}

Encoding Seq2SeqModel::encode(Tape& tape, std::span<const TokenId> source) const {
    require(!source.empty(), "encode: empty source sentence");
    require(source.size() <= kMaxSentenceLength,
            "encode: source length " + std::to_string(source.size()) + " exceeds 50");
    for (TokenId id : source) {
        require(id < config_.src_vocab_size, "encode: unknown source token id " + std::to_string(id));
    }
    const std::size_t h = config_.hidden_dim;
    Var embed = bind(tape, "enc.embed");
    Var w = bind(tape, "enc.lstm.W");
    Var b = bind(tape, "enc.lstm.b");
    Var attn = bind(tape, "attn.W");

    Var hidden = tape.constant(Tensor({h}, 0.0));
    Var cell = tape.constant(Tensor({h}, 0.0));
    std::vector<Var> states;
    std::vector<Var> keys;
    states.reserve(source.size());
    keys.reserve(source.size());
    for (TokenId id : source) {
        const std::array<Var, 2> inputs{row(embed, id), hidden};
        LstmOut out = lstm_cell(w, b, inputs, cell, h);
        hidden = out.hidden;
        cell = out.cell;
        states.push_back(hidden);
        keys.push_back(matvec(attn, hidden));
    }

    Encoding enc;
    enc.memory = stack_rows(states);
    enc.keys = stack_rows(keys);
    enc.summary = hidden;
    enc.length = source.size();
    enc.dec_embed = bind(tape, "dec.embed");
    enc.dec_w = bind(tape, "dec.lstm.W");
    enc.dec_b = bind(tape, "dec.lstm.b");
    enc.out_w = bind(tape, "out.W");
    enc.head_w = bind(tape, config_.head == Head::softmax_vocab ? "head.W" : "head.w");
    return enc;
}

DecoderState Seq2SeqModel::initial_state(Tape& tape, const Encoding& enc) const {
    const std::size_t h = config_.hidden_dim;
    return DecoderState{enc.summary, tape.constant(Tensor({h}, 0.0)), tape.constant(Tensor({h}, 0.0))};
}

StepOutput Seq2SeqModel::decode_step(Tape& tape, const Encoding& enc, const DecoderState& state,
                                     TokenId prev_token) const {
    (void)tape;
    require(prev_token < config_.tgt_vocab_size,
            "decode_step: token id " + std::to_string(prev_token) + " out of range");
    const std::size_t h = config_.hidden_dim;
    const std::array<Var, 3> inputs{state.feed, row(enc.dec_embed, prev_token), state.hidden};
    LstmOut lstm = lstm_cell(enc.dec_w, enc.dec_b, inputs, state.cell, h);

    StepOutput out;
    out.attention = softmax(matvec(enc.keys, lstm.hidden));
    Var context = matvec_t(enc.memory, out.attention);
    const std::array<Var, 2> joined{lstm.hidden, context};
    out.attentional = tanh(matvec(enc.out_w, concat(joined)));
    if (config_.head == Head::softmax_vocab) {
        out.log_probs = log_softmax(matvec(enc.head_w, out.attentional));
        const Tensor& lp = out.log_probs.value();
        out.probs.resize(lp.size());
        for (std::size_t k = 0; k < lp.size(); ++k) {
            out.probs[k] = std::exp(lp[k]);
        }
    } else {
        out.value = dot(enc.head_w, out.attentional);
    }
    out.next = DecoderState{lstm.hidden, lstm.cell, out.attentional};
    return out;
}

std::vector<Var> Seq2SeqModel::token_log_probs(Tape& tape, std::span<const TokenId> source,
                                               std::span<const TokenId> tokens) const {
    require(config_.head == Head::softmax_vocab, "token_log_probs needs a softmax_vocab head");
    for (TokenId id : tokens) {
        require(id < config_.tgt_vocab_size,
                "target token id " + std::to_string(id) + " out of range");
    }
    Encoding enc = encode(tape, source);
    DecoderState state = initial_state(tape, enc);
    std::vector<Var> out;
    out.reserve(tokens.size());
    TokenId prev = kBos;
    for (TokenId id : tokens) {
        StepOutput step = decode_step(tape, enc, state, prev);
        out.push_back(pick(step.log_probs, id));
        state = step.next;
        prev = id;
    }
    return out;
}

Var Seq2SeqModel::sequence_log_prob(Tape& tape, std::span<const TokenId> source,
                                    std::span<const TokenId> target) const {
    require(!target.empty(), "sequence_log_prob: empty target");
    require(target.back() == kEos, "sequence_log_prob: target must end with EOS");
    const std::vector<Var> steps = token_log_probs(tape, source, target);
    Var total = steps.front();
    for (std::size_t t = 1; t < steps.size(); ++t) {
        total = add(total, steps[t]);
    }
    return total;
}

double Seq2SeqModel::sequence_log_prob(std::span<const TokenId> source,
                                       std::span<const TokenId> target) const {
    Tape tape;
    return sequence_log_prob(tape, source, target).item();
}

SampledTranslation Seq2SeqModel::sample(Tape& tape, std::span<const TokenId> source, Rng& rng,
                                        std::size_t max_len) const {
    require(config_.head == Head::softmax_vocab, "sample needs a softmax_vocab head");
    const std::size_t limit = max_len > 0 ? max_len : config_.decode_limit(source.size());
    Encoding enc = encode(tape, source);
    DecoderState state = initial_state(tape, enc);
    SampledTranslation result;
    TokenId prev = kBos;
    for (std::size_t t = 0; t < limit; ++t) {
        StepOutput out = decode_step(tape, enc, state, prev);
        const auto token = static_cast<TokenId>(rng.categorical(out.probs));
        Var lp = pick(out.log_probs, token);
        result.tokens.push_back(token);
        result.log_probs.push_back(lp.item());
        result.log_prob_vars.push_back(lp);
        if (token == kEos) {
            break;
        }
        state = out.next;
        prev = token;
    }
    return result;
}

TokenSeq Seq2SeqModel::greedy_decode(std::span<const TokenId> source, std::size_t max_len) const {
    require(config_.head == Head::softmax_vocab, "greedy_decode needs a softmax_vocab head");
    const std::size_t limit = max_len > 0 ? max_len : config_.decode_limit(source.size());
    Tape tape;
    Encoding enc = encode(tape, source);
    DecoderState state = initial_state(tape, enc);
    TokenSeq tokens;
    TokenId prev = kBos;
    for (std::size_t t = 0; t < limit; ++t) {
        StepOutput out = decode_step(tape, enc, state, prev);
        const auto best = std::max_element(out.probs.begin(), out.probs.end());
        const auto token = static_cast<TokenId>(std::distance(out.probs.begin(), best));
        tokens.push_back(token);
        if (token == kEos) {
            break;
        }
        state = out.next;
        prev = token;
    }
    return tokens;
}

std::vector<Var> Seq2SeqModel::prefix_values(Tape& tape, std::span<const TokenId> source,
                                             std::span<const TokenId> target) const {
    require(config_.head == Head::scalar_value, "prefix_values needs a scalar_value head");
    require(!target.empty(), "prefix_values: empty target");
    Encoding enc = encode(tape, source);
    DecoderState state = initial_state(tape, enc);
    std::vector<Var> values;
    values.reserve(target.size());
    TokenId prev = kBos;
    for (std::size_t t = 0; t < target.size(); ++t) {
        StepOutput out = decode_step(tape, enc, state, prev);
        values.push_back(out.value);
        state = out.next;
        prev = target[t];
    }
    return values;
}

std::vector<double> Seq2SeqModel::prefix_values(std::span<const TokenId> source,
                                                std::span<const TokenId> target) const {
    Tape tape;
    std::vector<double> out;
    for (const Var& v : prefix_values(tape, source, target)) {
        out.push_back(v.item());
    }
    return out;
}

} // namespace banditseq
