#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "banditseq/bandit.hpp"
#include "banditseq/errors.hpp"
#include "banditseq/seq2seq.hpp"
#include "support.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <numeric>

using namespace banditseq;
using namespace testsupport;

namespace {

std::size_t expected_parameter_count(std::size_t vs, std::size_t vt, std::size_t e, std::size_t h,
                                     Head head) {
    const std::size_t encoder = vs * e + 4 * h * (e + h) + 4 * h;
    const std::size_t decoder = vt * e + 4 * h * (h + e + h) + 4 * h;
    const std::size_t attention = h * h + h * 2 * h;
    const std::size_t out = head == Head::softmax_vocab ? vt * h : h;
    return encoder + decoder + attention + out;
}

Seq2SeqModel scaled_model(std::size_t vs, std::size_t vt, std::size_t dim, std::uint64_t seed,
                          double factor) {
    Rng rng(seed);
    Seq2SeqModel m = Seq2SeqModel::create(tiny_config(vs, vt, dim), rng);
    scale_params(m, factor);
    return m;
}

} // namespace

TEST_CASE("parameter count follows the closed form") {
    Rng gen(1);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t vs = 1 + gen.below(30), vt = 1 + gen.below(30);
        Seq2SeqConfig c;
        c.src_vocab_size = vs;
        c.tgt_vocab_size = vt;
        c.embed_dim = 1 + gen.below(12);
        c.hidden_dim = 1 + gen.below(12);
        c.head = gen.below(2) == 0 ? Head::softmax_vocab : Head::scalar_value;
        Rng rng(trial);
        const ParamStore p = init_params(c, rng);
        CHECK(p.parameter_count() == expected_parameter_count(vs, vt, c.embed_dim, c.hidden_dim, c.head));
    }
}

TEST_CASE("weights start in [-0.1, 0.1], forget biases at 1") {
    Rng rng(3);
    const ParamStore p = init_params(tiny_config(7, 9, 6), rng);
    for (const auto& e : p.entries()) {
        CAPTURE(e.name);
        if (e.name.ends_with(".b")) {
            for (std::size_t k = 0; k < e.value.size(); ++k) {
                const bool forget = k >= 6 && k < 12;
                CHECK(e.value[k] == (forget ? 1.0 : 0.0));
            }
            continue;
        }
        double lo = 1.0, hi = -1.0;
        for (double v : e.value.values()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo >= -0.1);
        CHECK(hi <= 0.1);
    }
}

TEST_CASE("mis-shaped parameters are rejected") {
    Rng rng(3);
    ParamStore p = init_params(tiny_config(7, 9, 6), rng);
    CHECK_THROWS_AS(Seq2SeqModel(tiny_config(8, 9, 6), p), ContractViolation);
}

TEST_CASE("encode produces one state per source token") {
    Seq2SeqModel m = scaled_model(6, 5, 4, 2, 1.0);
    Tape tape;
    const TokenSeq src{3, 4, 5, 3};
    Encoding enc = m.encode(tape, src);
    CHECK(enc.memory.value().shape() == std::vector<std::size_t>{4, 4});
    CHECK(enc.keys.value().shape() == std::vector<std::size_t>{4, 4});
    CHECK(enc.length == 4);
    CHECK(enc.summary.value() == Tensor::vector({enc.memory.value().at(3, 0), enc.memory.value().at(3, 1),
                                                 enc.memory.value().at(3, 2), enc.memory.value().at(3, 3)}));
}

TEST_CASE("encode rejects empty, overlong and out-of-vocabulary sources") {
    Seq2SeqModel m = scaled_model(6, 5, 4, 2, 1.0);
    Tape tape;
    CHECK_THROWS_AS(m.encode(tape, TokenSeq{}), ContractViolation);
    CHECK_THROWS_AS(m.encode(tape, TokenSeq(51, 3)), ContractViolation);
    CHECK_NOTHROW(m.encode(tape, TokenSeq(50, 3)));
    CHECK_THROWS_AS(m.encode(tape, TokenSeq{3, 6}), ContractViolation);
}

TEST_CASE("all-zero weights give a uniform policy and greedy emits EOS") {
    Rng rng(4);
    Seq2SeqModel m = Seq2SeqModel::create(tiny_config(5, 6, 3), rng);
    zero_params(m);
    Tape tape;
    const TokenSeq src{3, 4};
    Encoding enc = m.encode(tape, src);
    StepOutput out = m.decode_step(tape, enc, m.initial_state(tape, enc), kBos);
    for (double p : out.probs) {
        CHECK(p == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
    }
    CHECK(m.greedy_decode(src) == TokenSeq{kEos});
}

TEST_CASE("two-word vocabulary at zero weights: log P of a 3-token target") {
    Rng rng(4);
    Seq2SeqModel m = Seq2SeqModel::create(tiny_config(4, 2, 3), rng);
    zero_params(m);
    const TokenSeq src{3};
    CHECK(m.sequence_log_prob(src, TokenSeq{1, 1, kEos}) == doctest::Approx(3.0 * std::log(0.5)).epsilon(1e-14));
}

TEST_CASE("step distributions sum to one") {
    Rng gen(5);
    for (int trial = 0; trial < 30; ++trial) {
        Seq2SeqModel m = scaled_model(8, 3 + gen.below(10), 2 + gen.below(5), trial, 20.0);
        const TokenSeq src = random_tokens(gen, 1, 8, 3, 8);
        Tape tape;
        Encoding enc = m.encode(tape, src);
        DecoderState state = m.initial_state(tape, enc);
        TokenId prev = kBos;
        for (int t = 0; t < 5; ++t) {
            StepOutput out = m.decode_step(tape, enc, state, prev);
            const double total = std::accumulate(out.probs.begin(), out.probs.end(), 0.0);
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            const Tensor& a = out.attention.value();
            CHECK(std::accumulate(a.values().begin(), a.values().end(), 0.0) ==
                  doctest::Approx(1.0).epsilon(1e-12));
            state = out.next;
            prev = static_cast<TokenId>(gen.below(m.config().tgt_vocab_size));
        }
    }
}

TEST_CASE("single-token source attends with weight exactly 1") {
    Seq2SeqModel m = scaled_model(5, 5, 4, 6, 10.0);
    Tape tape;
    Encoding enc = m.encode(tape, TokenSeq{4});
    StepOutput out = m.decode_step(tape, enc, m.initial_state(tape, enc), kBos);
    CHECK(out.attention.value() == Tensor::vector({1.0}));
}

TEST_CASE("probabilities over all complete translations sum to one") {
    Seq2SeqModel m = scaled_model(5, 3, 3, 7, 15.0);
    const TokenSeq src{3, 4};
    double total = 0.0;
    for (const TokenSeq& y : enumerate_translations(3, 4)) {
        Tape tape;
        double lp = 0.0;
        for (const Var& v : m.token_log_probs(tape, src, y)) {
            lp += v.item();
        }
        total += std::exp(lp);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sampling is a function of the generator state") {
    Seq2SeqModel m = scaled_model(6, 7, 4, 8, 10.0);
    const TokenSeq src{3, 4, 5};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Tape t1, t2;
        Rng a(seed), b(seed);
        const SampledTranslation s1 = m.sample(t1, src, a);
        const SampledTranslation s2 = m.sample(t2, src, b);
        CHECK(s1.tokens == s2.tokens);
        CHECK(s1.log_probs == s2.log_probs);
        CHECK(s1.tokens.size() <= m.config().decode_limit(src.size()));
        // Log-probabilities agree with teacher forcing on the drawn tokens.
        Tape t3;
        const auto forced = m.token_log_probs(t3, src, s1.tokens);
        for (std::size_t k = 0; k < forced.size(); ++k) {
            CHECK(forced[k].item() == s1.log_probs[k]);
        }
    }
}

TEST_CASE("first-token sample frequencies pass a chi-square test") {
    Seq2SeqModel m = scaled_model(6, 6, 4, 9, 12.0);
    const TokenSeq src{3, 5};
    Tape tape;
    Encoding enc = m.encode(tape, src);
    const std::vector<double> probs = m.decode_step(tape, enc, m.initial_state(tape, enc), kBos).probs;
    const int n = 20000;
    std::vector<int> counts(probs.size(), 0);
    Rng rng(77);
    for (int i = 0; i < n; ++i) {
        Tape t;
        ++counts[m.sample(t, src, rng, 1).tokens.front()];
    }
    double chi2 = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        const double expect = n * probs[k];
        REQUIRE(expect > 5.0);
        chi2 += (counts[k] - expect) * (counts[k] - expect) / expect;
    }
    const boost::math::chi_squared dist(static_cast<double>(probs.size() - 1));
    CHECK(chi2 < boost::math::quantile(dist, 0.999));
}

TEST_CASE("greedy picks the argmax at every step of its own prefix") {
    Rng gen(10);
    for (int trial = 0; trial < 20; ++trial) {
        Seq2SeqModel m = scaled_model(7, 6, 4, 100 + trial, 25.0);
        const TokenSeq src = random_tokens(gen, 1, 6, 3, 7);
        const TokenSeq g = m.greedy_decode(src);
        REQUIRE(!g.empty());
        CHECK(g.size() <= m.config().decode_limit(src.size()));
        for (std::size_t t = 0; t < g.size(); ++t) {
            TokenSeq alt(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(t) + 1);
            Tape base;
            const double chosen = m.token_log_probs(base, src, alt)[t].item();
            for (TokenId k = 0; k < 6; ++k) {
                alt[t] = k;
                Tape tt;
                const double other = m.token_log_probs(tt, src, alt)[t].item();
                CHECK(other <= chosen);
                if (other == chosen) {
                    CHECK(k >= g[t]);
                }
            }
        }
    }
}

TEST_CASE("decode limit defaults to 2 * len + 5") {
    Seq2SeqConfig c = tiny_config(4, 4, 2);
    CHECK(c.decode_limit(7) == 19);
    c.max_decode_len = 3;
    CHECK(c.decode_limit(7) == 3);
}

TEST_CASE("critic and translation heads see the same attentional vector") {
    Rng rng(12);
    Seq2SeqModel nmt = Seq2SeqModel::create(tiny_config(6, 5, 4), rng);
    scale_params(nmt, 8.0);
    ParamStore cp;
    for (const auto& e : nmt.params().entries()) {
        if (e.name != "head.W") {
            cp.add(e.name, e.value);
        }
    }
    cp.add("head.w", random_tensor(rng, {4}));
    Seq2SeqModel critic(tiny_config(6, 5, 4, Head::scalar_value), cp);

    const TokenSeq src{3, 4, 5};
    const TokenSeq y{2, 3, kEos};
    Tape ta, tb;
    Encoding ea = nmt.encode(ta, src);
    Encoding eb = critic.encode(tb, src);
    DecoderState sa = nmt.initial_state(ta, ea), sb = critic.initial_state(tb, eb);
    TokenId prev = kBos;
    for (TokenId tok : y) {
        StepOutput oa = nmt.decode_step(ta, ea, sa, prev);
        StepOutput ob = critic.decode_step(tb, eb, sb, prev);
        CHECK(oa.attentional.value() == ob.attentional.value());
        double v = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
            v += cp.at("head.w").value[k] * ob.attentional.value()[k];
        }
        CHECK(ob.value.item() == doctest::Approx(v).epsilon(1e-14));
        sa = oa.next;
        sb = ob.next;
        prev = tok;
    }
    CHECK(critic.prefix_values(src, y).size() == y.size());
    Tape tc;
    CHECK_THROWS_AS(critic.sample(tc, src, rng), ContractViolation);
    CHECK_THROWS_AS(nmt.prefix_values(src, y), ContractViolation);
}

TEST_CASE("teacher-forced gradients bind to the model's store") {
    Seq2SeqModel m = scaled_model(5, 5, 3, 13, 5.0);
    m.params().zero_grad();
    Tape tape;
    tape.backward(m.sequence_log_prob(tape, TokenSeq{3, 4}, TokenSeq{3, kEos}));
    double norm = 0.0;
    for (const auto& e : m.params().entries()) {
        for (double g : e.grad.values()) {
            norm += g * g;
        }
    }
    CHECK(norm > 0.0);
    CHECK_THROWS_AS(m.sequence_log_prob(TokenSeq{3}, TokenSeq{3, 4}), ContractViolation);
}
