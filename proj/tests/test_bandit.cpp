#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "banditseq/bandit.hpp"
#include "banditseq/errors.hpp"
#include "banditseq/experiment.hpp"
#include "banditseq/grad_check.hpp"
#include "banditseq/rater.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

using namespace banditseq;
using namespace testsupport;

namespace {

Seq2SeqModel small_model(std::size_t vs, std::size_t vt, std::size_t dim, std::uint64_t seed,
                         double factor = 1.0, Head head = Head::softmax_vocab) {
    Rng rng(seed);
    Seq2SeqModel m = Seq2SeqModel::create(tiny_config(vs, vt, dim, head), rng);
    scale_params(m, factor);
    return m;
}

std::vector<SentencePair> random_pairs(Rng& rng, std::size_t n, std::size_t vs, std::size_t vt) {
    std::vector<SentencePair> out;
    for (std::size_t i = 0; i < n; ++i) {
        SentencePair p;
        p.source = random_tokens(rng, 1, 5, kReservedTokens, vs);
        p.target = random_tokens(rng, 1, 5, kReservedTokens, vt);
        p.target.push_back(kEos);
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<const SentencePair*> pointers(const std::vector<SentencePair>& pairs) {
    std::vector<const SentencePair*> out;
    for (const auto& p : pairs) {
        out.push_back(&p);
    }
    return out;
}

std::vector<BanditItem> items_for(const std::vector<SentencePair>& pairs, std::uint64_t round_base = 0) {
    std::vector<BanditItem> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        out.push_back(BanditItem{pairs[i].source, i, round_base + i});
    }
    return out;
}

Feedback bleu_feedback(const std::vector<SentencePair>& pairs) {
    return [&pairs](std::size_t item, std::uint64_t, std::span<const TokenId> hyp) {
        return expert_rating(hyp, pairs[item].target);
    };
}

double total_grad_norm(const ParamStore& ps) {
    double s = 0.0;
    for (const auto& e : ps.entries()) {
        for (double g : e.grad.values()) {
            s += g * g;
        }
    }
    return std::sqrt(s);
}

} // namespace

TEST_SUITE("pretraining") {
    TEST_CASE("one pair is memorized") {
        SentencePair p{{3}, {4, kEos}, Split::supervised};
        const std::vector<const SentencePair*> train{&p};
        Seq2SeqModel m = small_model(4, 5, 8, 1);
        PretrainConfig c;
        c.epochs = 200;
        c.batch_size = 1;
        // Dev and train coincide here, so the decay rule would only react to
        // rounding-level wiggles; the plateau at perplexity 2 (both steps
        // predicted alike) needs a larger rate to escape within 200 epochs.
        c.learning_rate = 2e-2;
        c.decay_start_epoch = c.epochs + 1;
        Rng rng(2);
        const auto log = pretrain_supervised(m, train, train, c, rng);
        CHECK(log.size() == 200);
        CHECK(m.sequence_log_prob(p.source, p.target) > std::log(0.99));
    }

    TEST_CASE("rising dev perplexity halves the rate from the start epoch on") {
        PerplexityDecay decay(5, 0.5);
        double lr = 1e-3;
        std::vector<double> rates;
        for (std::size_t epoch = 1; epoch <= 8; ++epoch) {
            lr = decay.next_rate(epoch, 10.0 + static_cast<double>(epoch), lr);
            rates.push_back(lr);
        }
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(rates[i] == 1e-3);
        }
        CHECK(rates[4] == 5e-4);
        CHECK(rates[5] == 2.5e-4);
        CHECK(rates[7] == 1e-3 / 16);
    }

    TEST_CASE("falling dev perplexity never decays") {
        PerplexityDecay decay(1, 0.5);
        double lr = 1.0;
        for (std::size_t epoch = 1; epoch <= 6; ++epoch) {
            lr = decay.next_rate(epoch, 10.0 - static_cast<double>(epoch), lr);
        }
        CHECK(lr == 1.0);
    }

    TEST_CASE("MLE gradient passes the finite-difference check") {
        Rng rng(3);
        const auto pairs = random_pairs(rng, 3, 6, 6);
        Seq2SeqModel m = small_model(6, 6, 4, 4, 5.0);
        auto loss = [&](Tape& tape, ParamStore&) {
            Var total = scale(m.sequence_log_prob(tape, pairs[0].source, pairs[0].target), -1.0);
            for (std::size_t i = 1; i < pairs.size(); ++i) {
                total = sub(total, m.sequence_log_prob(tape, pairs[i].source, pairs[i].target));
            }
            return total;
        };
        const GradCheckReport r = finite_diff_check(loss, m.params());
        CHECK(r.passed());
        CHECK(r.max_relative_error < 1e-4);
    }

    TEST_CASE("a small supervised step lowers the batch loss") {
        Rng rng(5);
        const auto pairs = random_pairs(rng, 4, 6, 6);
        const auto batch = pointers(pairs);
        Seq2SeqModel m = small_model(6, 6, 4, 6);
        Seq2SeqModel twin = m;
        Adam opt(m.params(), AdamConfig{.learning_rate = 1e-3});
        const double before = supervised_batch_step(m, batch, opt);
        Adam opt2(twin.params(), AdamConfig{.learning_rate = 1e-3});
        CHECK(supervised_finetune_step(twin, batch, opt2) == before);
        CHECK(twin.params().same_values(m.params()));
        double after = 0.0;
        for (const auto* p : batch) {
            after -= m.sequence_log_prob(p->source, p->target);
        }
        CHECK(after / 4.0 < before);
    }

    TEST_CASE("empty corpora are rejected") {
        Seq2SeqModel m = small_model(4, 4, 2, 1);
        Rng rng(1);
        Seq2SeqModel critic = make_critic(m.config(), rng);
        const std::vector<const SentencePair*> none;
        CHECK_THROWS_AS(pretrain_supervised(m, none, none, PretrainConfig{}, rng), ContractViolation);
        CHECK_THROWS_AS(pretrain_critic(critic, m, none, CriticPretrainConfig{}, rng), ContractViolation);
    }
}

TEST_SUITE("critic") {
    TEST_CASE("one value per target token, zero weights give zero") {
        Seq2SeqModel critic = small_model(5, 5, 3, 7, 1.0, Head::scalar_value);
        CHECK(critic_values(critic, TokenSeq{3, 4}, TokenSeq{kEos}).size() == 1);
        CHECK(critic_values(critic, TokenSeq{3, 4}, TokenSeq{3, 4, kEos}).size() == 3);
        zero_params(critic);
        for (double v : critic_values(critic, TokenSeq{3, 4}, TokenSeq{3, 4, kEos})) {
            CHECK(v == 0.0);
        }
    }

    TEST_CASE("values depend on the source through attention") {
        Rng rng(8);
        int changed = 0;
        for (int trial = 0; trial < 20; ++trial) {
            Seq2SeqModel critic = small_model(8, 6, 4, 100 + trial, 10.0, Head::scalar_value);
            TokenSeq x = random_tokens(rng, 2, 6, 3, 8);
            const TokenSeq y = random_tokens(rng, 1, 5, 3, 6);
            const auto before = critic_values(critic, x, y);
            const std::size_t pos = rng.below(x.size());
            x[pos] = 3 + (x[pos] - 3 + 1 + static_cast<TokenId>(rng.below(4))) % 5;
            changed += critic_values(critic, x, y) != before ? 1 : 0;
        }
        CHECK(changed == 20);
    }

    TEST_CASE("critic gradient passes the finite-difference check") {
        Seq2SeqModel critic = small_model(6, 6, 4, 9, 5.0, Head::scalar_value);
        const TokenSeq x{3, 4, 5}, y{4, 5, kEos};
        auto loss = [&](Tape& tape, ParamStore&) { return critic_loss(tape, critic, x, y, 0.6); };
        const GradCheckReport r = finite_diff_check(loss, critic.params());
        CHECK(r.passed());
        CHECK(r.max_relative_error < 1e-4);
    }

    TEST_CASE("constant target 0.37 is learned") {
        Rng rng(10);
        const auto pairs = random_pairs(rng, 32, 8, 8);
        const auto train = pointers(pairs);
        Seq2SeqModel nmt = small_model(8, 8, 6, 11, 5.0);
        Rng crng(12);
        Seq2SeqModel critic = make_critic(nmt.config(), crng);
        const PairReward constant = [](const SentencePair&, std::span<const TokenId>) { return 0.37; };
        CriticPretrainConfig c;
        c.epochs = 100;
        c.batch_size = 8;
        c.learning_rate = 1e-2;
        Rng train_rng(13);
        const auto log = pretrain_critic(critic, nmt, train, c, train_rng, constant);
        // Settle Adam's oscillation with a smaller rate.
        c.learning_rate = 1e-3;
        c.epochs = 50;
        const auto tail = pretrain_critic(critic, nmt, train, c, train_rng, constant);
        MESSAGE("critic squared error first " << log.front() << " last " << tail.back());
        CHECK(tail.back() < log.front());
        Rng sample_rng(14);
        for (const auto* p : train) {
            Tape t;
            const TokenSeq y = nmt.sample(t, p->source, sample_rng).tokens;
            for (double v : critic_values(critic, p->source, y)) {
                CHECK(std::abs(v - 0.37) <= 0.02);
            }
        }
    }
}

TEST_SUITE("policy gradient") {
    TEST_CASE("zero advantage leaves the actor untouched") {
        Rng rng(20);
        const auto pairs = random_pairs(rng, 4, 6, 6);
        Seq2SeqModel actor = small_model(6, 6, 4, 21, 5.0);
        const Seq2SeqModel before = actor;
        Seq2SeqModel critic = small_model(6, 6, 4, 22, 1.0, Head::scalar_value);
        zero_params(critic);
        Adam aopt(actor.params(), AdamConfig{});
        Adam copt(critic.params(), AdamConfig{});
        const auto items = items_for(pairs);
        const Feedback zero = [](std::size_t, std::uint64_t, std::span<const TokenId>) { return 0.0; };
        const auto out = a2c_batch_step(actor, critic, aopt, copt, items, zero, Rng(23));
        CHECK(actor.params().same_values(before.params()));
        for (const auto& o : out) {
            CHECK(o.values.size() == o.translation.size());
            CHECK(o.advantages.size() == o.translation.size());
            for (double a : o.advantages) {
                CHECK(a == 0.0);
            }
        }

        // Baseline equal to a constant reward cancels it exactly.
        Rng srng(24);
        const GradientSample g = sample_policy_gradient(
            before, pairs[0].source, srng, [](std::span<const TokenId>) { return 0.7; },
            [](std::span<const TokenId>) { return 0.7; }, 6);
        for (const Tensor& t : g.gradient) {
            for (double v : t.values()) {
                CHECK(v == 0.0);
            }
        }
    }

    TEST_CASE("a2c with a zero critic is REINFORCE bit for bit") {
        Rng rng(30);
        const auto pairs = random_pairs(rng, 6, 7, 7);
        const auto items = items_for(pairs, 40);
        const Feedback fb = bleu_feedback(pairs);
        Seq2SeqModel a = small_model(7, 7, 4, 31, 5.0);
        Seq2SeqModel b = a;
        Seq2SeqModel critic = small_model(7, 7, 4, 32, 1.0, Head::scalar_value);
        zero_params(critic);
        Adam aa(a.params(), AdamConfig{});
        Adam ab(b.params(), AdamConfig{});
        Adam ac(critic.params(), AdamConfig{});
        const auto oa = a2c_batch_step(a, critic, aa, ac, items, fb, Rng(33));
        const auto ob = reinforce_step(b, ab, items, fb, Rng(33));
        CHECK(a.params().same_values(b.params()));
        REQUIRE(oa.size() == ob.size());
        for (std::size_t i = 0; i < oa.size(); ++i) {
            CHECK(oa[i].translation == ob[i].translation);
            CHECK(oa[i].reward == ob[i].reward);
            CHECK(oa[i].actor_loss == ob[i].actor_loss);
        }
    }

    TEST_CASE("replaying a step reproduces both models") {
        Rng rng(40);
        const auto pairs = random_pairs(rng, 5, 7, 7);
        const auto items = items_for(pairs);
        const std::vector<SentencePair> frozen = pairs;
        RaterConfig rater{{Variance{1.0}}, 99};
        const Feedback fb = [&](std::size_t item, std::uint64_t round, std::span<const TokenId> hyp) {
            return rate(hyp, pairs[item].target, rater, round);
        };
        auto run = [&] {
            Seq2SeqModel actor = small_model(7, 7, 4, 41, 5.0);
            Seq2SeqModel critic = small_model(7, 7, 4, 42, 3.0, Head::scalar_value);
            Adam aopt(actor.params(), AdamConfig{.learning_rate = 1e-2});
            Adam copt(critic.params(), AdamConfig{.learning_rate = 1e-2});
            for (int step = 0; step < 3; ++step) {
                (void)a2c_batch_step(actor, critic, aopt, copt, items_for(pairs, 10 * step), fb, Rng(43));
            }
            return std::pair{actor, critic};
        };
        const auto [a1, c1] = run();
        const auto [a2, c2] = run();
        CHECK(a1.params().same_values(a2.params()));
        CHECK(c1.params().same_values(c2.params()));
        CHECK(rater.noise_seed == 99);
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            CHECK(pairs[i].target == frozen[i].target);
        }
    }

    TEST_CASE("a non-finite reward is a numeric error") {
        Rng rng(45);
        const auto pairs = random_pairs(rng, 2, 5, 5);
        Seq2SeqModel actor = small_model(5, 5, 3, 46);
        Adam opt(actor.params(), AdamConfig{});
        const Feedback bad = [](std::size_t, std::uint64_t, std::span<const TokenId>) {
            return std::numeric_limits<double>::quiet_NaN();
        };
        CHECK_THROWS_AS(reinforce_step(actor, opt, items_for(pairs), bad, Rng(1)), NumericError);
    }

    TEST_CASE("enumeration covers every complete translation once") {
        const auto all = enumerate_translations(3, 3);
        // 1 + 2 + 4 sequences end in EOS, plus 8 truncated EOS-free ones.
        CHECK(all.size() == 15);
        CHECK_THROWS_AS(exact_policy_gradient(small_model(4, 10, 2, 1), TokenSeq{3},
                                              [](std::span<const TokenId>) { return 1.0; }, 6),
                        ContractViolation);
    }

    TEST_CASE("exact gradient of a constant reward vanishes") {
        const Seq2SeqModel m = small_model(5, 3, 3, 50, 10.0);
        const auto grad = exact_policy_gradient(m, TokenSeq{3, 4}, [](std::span<const TokenId>) { return 0.8; }, 3);
        for (const Tensor& t : grad) {
            for (double v : t.values()) {
                CHECK(std::abs(v) < 1e-14);
            }
        }
    }

    TEST_CASE("two outcomes: exact gradient equals the hand chain rule") {
        const Seq2SeqModel m = small_model(5, 2, 3, 51, 10.0);
        const TokenSeq x{3, 4};
        const double r0 = 0.3, r1 = 0.9;
        const auto grad = exact_policy_gradient(
            m, x, [&](std::span<const TokenId> y) { return y[0] == 0 ? r0 : r1; }, 1);

        Tape tape;
        Encoding enc = m.encode(tape, x);
        StepOutput out = m.decode_step(tape, enc, m.initial_state(tape, enc), kBos);
        const std::vector<double>& p = out.probs;
        const Tensor& h = out.attentional.value();
        const double mean = p[0] * r0 + p[1] * r1;
        const double r[2] = {r0, r1};
        // d/dW_j sum_k R_k p_k = p_j (R_j - mean) h
        std::size_t head = 0;
        for (std::size_t k = 0; k < m.params().size(); ++k) {
            if (m.params().entries()[k].name == "head.W") {
                head = k;
            }
        }
        for (std::size_t j = 0; j < 2; ++j) {
            for (std::size_t d = 0; d < 3; ++d) {
                CHECK(grad[head].at(j, d) == doctest::Approx(p[j] * (r[j] - mean) * h[d]).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("sampled estimator is unbiased for several baselines") {
        const Seq2SeqModel m = small_model(5, 3, 3, 60, 8.0);
        const TokenSeq x{3, 4};
        const SequenceReward reward = [](std::span<const TokenId> y) {
            return 0.2 + 0.5 * static_cast<double>(y.size()) - 0.3 * (y[0] == 1 ? 1.0 : 0.0);
        };
        const auto exact = exact_policy_gradient(m, x, reward, 2);
        const std::vector<PrefixBaseline> baselines{
            [](std::span<const TokenId>) { return 0.0; },
            [](std::span<const TokenId> prefix) { return 0.4 + 0.3 * static_cast<double>(prefix.size()); },
        };
        const int n = 20000;
        for (const auto& baseline : baselines) {
            std::vector<std::vector<double>> s1, s2;
            for (const Tensor& t : exact) {
                s1.emplace_back(t.size(), 0.0);
                s2.emplace_back(t.size(), 0.0);
            }
            Rng rng(61);
            for (int i = 0; i < n; ++i) {
                const GradientSample g = sample_policy_gradient(m, x, rng, reward, baseline, 2);
                for (std::size_t k = 0; k < exact.size(); ++k) {
                    for (std::size_t c = 0; c < exact[k].size(); ++c) {
                        s1[k][c] += g.gradient[k][c];
                        s2[k][c] += g.gradient[k][c] * g.gradient[k][c];
                    }
                }
            }
            int outside = 0, total = 0;
            for (std::size_t k = 0; k < exact.size(); ++k) {
                for (std::size_t c = 0; c < exact[k].size(); ++c) {
                    const double mean = s1[k][c] / n;
                    const double se = std::sqrt(std::max(s2[k][c] / n - mean * mean, 0.0) / n);
                    ++total;
                    if (std::abs(mean - exact[k][c]) > 4.0 * se + 1e-12) {
                        ++outside;
                    }
                }
            }
            CHECK(total > 100);
            CHECK(outside == 0);
        }
    }

    TEST_CASE("zero reward for every sample gives no update") {
        Rng rng(70);
        const auto pairs = random_pairs(rng, 3, 6, 6);
        Seq2SeqModel actor = small_model(6, 6, 4, 71, 5.0);
        const Seq2SeqModel before = actor;
        Adam opt(actor.params(), AdamConfig{});
        const Feedback zero = [](std::size_t, std::uint64_t, std::span<const TokenId>) { return 0.0; };
        (void)reinforce_step(actor, opt, items_for(pairs), zero, Rng(72));
        CHECK(actor.params().same_values(before.params()));
        CHECK(total_grad_norm(actor.params()) == 0.0);
    }
}

// Desk-scale checks on the cipher task. The weak (one-epoch) reference leaves
// room to improve, so learning effects are visible within one pass.
TEST_SUITE("cipher task") {
    struct Desk {
        ExperimentConfig config;
        Corpus corpus;
        ReferenceModels ref;
    };

    const Desk& desk() {
        static const Desk d = [] {
            ExperimentConfig c = make_preset("table2-desk-weak");
            c.cache_dir = (std::filesystem::temp_directory_path() / "banditseq-test-bandit-cache").string();
            Corpus corpus = build_corpus(c.task);
            ReferenceModels ref = prepare_reference(c, corpus);
            return Desk{c, std::move(corpus), std::move(ref)};
        }();
        return d;
    }

    TEST_CASE("training loss does not rise by more than 5% in any epoch") {
        const Desk& d = desk();
        const auto train = d.corpus.split(Split::supervised);
        const auto dev = d.corpus.split(Split::dev);
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            Rng init(seed);
            Seq2SeqConfig mc = d.ref.nmt.config();
            Seq2SeqModel m = Seq2SeqModel::create(mc, init);
            PretrainConfig pc; // module defaults: batch 64, lr 1e-3
            pc.epochs = 6;
            Rng rng(seed + 100);
            const auto log = pretrain_supervised(m, train, dev, pc, rng);
            for (std::size_t e = 1; e < log.size(); ++e) {
                CAPTURE(seed);
                CAPTURE(e);
                CHECK(log[e].train_loss <= 1.05 * log[e - 1].train_loss);
            }
            CHECK(log.back().train_loss < log.front().train_loss);
        }
    }

    TEST_CASE("critic pretraining halves its loss") {
        const Desk& d = desk();
        Rng rng(7);
        Seq2SeqModel critic = make_critic(d.ref.nmt.config(), rng);
        const auto log = pretrain_critic(critic, d.ref.nmt, d.corpus.split(Split::supervised),
                                         d.config.pretrain.critic, rng);
        REQUIRE(log.size() >= 2);
        CHECK(log.back() <= 0.5 * log.front());
    }

    TEST_CASE("REINFORCE gradients vary more than A2C gradients") {
        const Desk& d = desk();
        const auto bandit = d.corpus.split(Split::bandit);
        const Seq2SeqModel& nmt = d.ref.nmt;
        const Seq2SeqModel& critic = d.ref.critic;
        const int n = 2000;
        std::vector<double> m_r, s_r, m_a, s_a;
        for (int i = 0; i < n; ++i) {
            const SentencePair& p = *bandit[static_cast<std::size_t>(i) % bandit.size()];
            const SequenceReward reward = [&](std::span<const TokenId> y) { return expert_rating(y, p.target); };
            const PrefixBaseline zero = [](std::span<const TokenId>) { return 0.0; };
            // The critic's V(y_<t) for the prefixes of the translation drawn below.
            Rng r1(static_cast<std::uint64_t>(i)), r2(static_cast<std::uint64_t>(i));
            const GradientSample g_r = sample_policy_gradient(nmt, p.source, r1, reward, zero, 0);
            const std::vector<double> values = critic_values(critic, p.source, g_r.translation);
            const PrefixBaseline v = [&](std::span<const TokenId> prefix) { return values[prefix.size()]; };
            const GradientSample g_a = sample_policy_gradient(nmt, p.source, r2, reward, v, 0);
            REQUIRE(g_a.translation == g_r.translation);
            std::size_t c = 0;
            for (std::size_t k = 0; k < g_r.gradient.size(); ++k) {
                for (std::size_t j = 0; j < g_r.gradient[k].size(); ++j, ++c) {
                    if (i == 0) {
                        m_r.push_back(0), s_r.push_back(0), m_a.push_back(0), s_a.push_back(0);
                    }
                    m_r[c] += g_r.gradient[k][j];
                    s_r[c] += g_r.gradient[k][j] * g_r.gradient[k][j];
                    m_a[c] += g_a.gradient[k][j];
                    s_a[c] += g_a.gradient[k][j] * g_a.gradient[k][j];
                }
            }
        }
        std::vector<double> ratio;
        for (std::size_t c = 0; c < m_r.size(); ++c) {
            const double vr = s_r[c] / n - (m_r[c] / n) * (m_r[c] / n);
            const double va = s_a[c] / n - (m_a[c] / n) * (m_a[c] / n);
            if (vr > 0.0 && va > 0.0) {
                ratio.push_back(vr / va);
            }
        }
        REQUIRE(!ratio.empty());
        std::nth_element(ratio.begin(), ratio.begin() + static_cast<std::ptrdiff_t>(ratio.size() / 2), ratio.end());
        const double median = ratio[ratio.size() / 2];
        MESSAGE("median variance ratio REINFORCE / A2C: " << median);
        CHECK(median >= 1.0);
    }

    // Low power at desk scale: 50 sentences per tenth against a one-pass gain
    // of a few BLEU points. Allowed to fail; the outcome is printed.
    TEST_CASE("online reward is higher at the end of a pass than at the start" * doctest::may_fail()) {
        const Desk& d = desk();
        const auto bandit = d.corpus.split(Split::bandit);
        std::vector<std::span<const TokenId>> sources;
        for (const auto* p : bandit) {
            sources.push_back(p->source);
        }
        const Feedback fb = [&](std::size_t item, std::uint64_t, std::span<const TokenId> hyp) {
            return expert_rating(hyp, bandit[item]->target);
        };
        int wins = 0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            Seq2SeqModel actor = d.ref.nmt;
            Seq2SeqModel critic = d.ref.critic;
            std::vector<double> rewards;
            run_bandit(actor, &critic, sources, fb, d.config.bandit, Rng(seed), [&](const BanditStepReport& r) {
                for (const auto& o : *r.outcomes) {
                    rewards.push_back(o.reward);
                }
            });
            REQUIRE(rewards.size() == sources.size());
            const std::size_t tenth = rewards.size() / 10;
            const double first = std::accumulate(rewards.begin(), rewards.begin() + static_cast<std::ptrdiff_t>(tenth), 0.0);
            const double last = std::accumulate(rewards.end() - static_cast<std::ptrdiff_t>(tenth), rewards.end(), 0.0);
            MESSAGE("seed " << seed << " first 10% " << first / tenth << " last 10% " << last / tenth);
            wins += last > first ? 1 : 0;
        }
        // One-sided sign test at 5 seeds: only 5/5 is significant at 5%.
        MESSAGE("seeds improving: " << wins << "/5");
        CHECK(wins == 5);
    }
}
