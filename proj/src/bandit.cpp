#include "banditseq/bandit.hpp"

#include "banditseq/errors.hpp"
#include "banditseq/rater.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace banditseq {

namespace {

void shuffle_indices(std::vector<std::size_t>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::swap(items[i - 1], items[rng.below(i)]);
    }
}

std::vector<Tensor> take_gradients(ParamStore& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (auto& e : params.entries()) {
        out.push_back(e.grad);
    }
    params.zero_grad();
    return out;
}

// Accumulates the actor's loss gradient for one sampled translation:
// d/dtheta of -sum_t advantage_t * log P(y_t | y_<t, x).
double actor_backward(Tape& tape, const SampledTranslation& sample,
                      std::span<const double> advantages) {
    double loss = 0.0;
    Var total{};
    for (std::size_t t = 0; t < sample.log_prob_vars.size(); ++t) {
        Var term = scale(sample.log_prob_vars[t], -advantages[t]);
        total = t == 0 ? term : add(total, term);
        loss -= advantages[t] * sample.log_probs[t];
    }
    tape.backward(total);
    return loss;
}

std::vector<StepOutcome> policy_gradient_step(Seq2SeqModel& actor, Seq2SeqModel* critic,
                                              Adam& actor_opt, Adam* critic_opt,
                                              std::span<const BanditItem> batch,
                                              const Feedback& feedback, const Rng& rng) {
    require(!batch.empty(), "bandit step: empty batch");
    require(static_cast<bool>(feedback), "bandit step: missing feedback callback");
    std::vector<StepOutcome> outcomes;
    outcomes.reserve(batch.size());
    for (const BanditItem& item : batch) {
        Rng sample_rng = rng.fork(item.round);
        Tape tape;
        SampledTranslation sample = actor.sample(tape, item.source, sample_rng);

        StepOutcome out;
        out.translation = sample.tokens;
        out.reward = feedback(item.item, item.round, sample.tokens);
        if (!std::isfinite(out.reward)) {
            throw NumericError("feedback returned a non-finite reward");
        }

        const std::size_t m = sample.tokens.size();
        out.values.assign(m, 0.0);
        std::optional<Tape> critic_tape;
        std::vector<Var> value_vars;
        if (critic != nullptr) {
            critic_tape.emplace();
            value_vars = critic->prefix_values(*critic_tape, item.source, sample.tokens);
            for (std::size_t t = 0; t < m; ++t) {
                out.values[t] = value_vars[t].item();
            }
        }
        out.advantages.resize(m);
        for (std::size_t t = 0; t < m; ++t) {
            out.advantages[t] = out.reward - out.values[t];
        }
        out.actor_loss = actor_backward(tape, sample, out.advantages);

        if (critic != nullptr) {
            Tape& ct = *critic_tape;
            Var target = ct.constant(Tensor::scalar(out.reward));
            Var total{};
            for (std::size_t t = 0; t < m; ++t) {
                Var diff = sub(value_vars[t], target);
                Var sq = mul(diff, diff);
                total = t == 0 ? sq : add(total, sq);
                out.critic_loss += (out.values[t] - out.reward) * (out.values[t] - out.reward);
            }
            ct.backward(scale(total, 0.5));
        }
        outcomes.push_back(std::move(out));
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    actor_opt.step(actor.params(), inv);
    if (critic != nullptr) {
        critic_opt->step(critic->params(), inv);
    }
    return outcomes;
}

} // namespace

double PerplexityDecay::next_rate(std::size_t epoch, double dev_perplexity, double current_rate) {
    double rate = current_rate;
    if (epoch >= start_ && has_previous_ && dev_perplexity > previous_) {
        rate *= factor_;
    }
    previous_ = dev_perplexity;
    has_previous_ = true;
    return rate;
}

double supervised_batch_step(Seq2SeqModel& model, PairBatch batch, Adam& optimizer) {
    require(!batch.empty(), "supervised step: empty batch");
    double total = 0.0;
    for (const SentencePair* pair : batch) {
        Tape tape;
        Var lp = model.sequence_log_prob(tape, pair->source, pair->target);
        Var loss = scale(lp, -1.0);
        total += loss.item();
        tape.backward(loss);
    }
    optimizer.step(model.params(), 1.0 / static_cast<double>(batch.size()));
    return total / static_cast<double>(batch.size());
}

double dev_perplexity(const Seq2SeqModel& model, PairBatch dev) {
    require(!dev.empty(), "dev_perplexity: empty dev set");
    double nll = 0.0;
    std::size_t tokens = 0;
    for (const SentencePair* pair : dev) {
        nll -= model.sequence_log_prob(pair->source, pair->target);
        tokens += pair->target.size();
    }
    return std::exp(nll / static_cast<double>(tokens));
}

std::vector<EpochLog> pretrain_supervised(Seq2SeqModel& model, PairBatch train, PairBatch dev,
                                          const PretrainConfig& config, Rng& rng) {
    require(!train.empty(), "pretrain_supervised: empty training corpus");
    require(!dev.empty(), "pretrain_supervised: empty development corpus");
    require(config.batch_size >= 1, "pretrain_supervised: batch size must be >= 1");
    Adam opt(model.params(), AdamConfig{.learning_rate = config.learning_rate, .clip_norm = config.clip_norm});
    PerplexityDecay decay(config.decay_start_epoch, config.decay_factor);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<EpochLog> log;
    std::vector<const SentencePair*> batch;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_indices(order, rng);
        EpochLog entry;
        entry.epoch = epoch;
        entry.learning_rate = opt.learning_rate();
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            batch.clear();
            for (std::size_t k = start; k < std::min(start + config.batch_size, order.size()); ++k) {
                batch.push_back(train[order[k]]);
            }
            loss_sum += supervised_batch_step(model, batch, opt) * static_cast<double>(batch.size());
        }
        entry.train_loss = loss_sum / static_cast<double>(order.size());
        entry.dev_perplexity = dev_perplexity(model, dev);
        opt.set_learning_rate(decay.next_rate(epoch, entry.dev_perplexity, opt.learning_rate()));
        log.push_back(entry);
    }
    return log;
}

Seq2SeqModel make_critic(const Seq2SeqConfig& nmt_config, Rng& rng) {
    Seq2SeqConfig c = nmt_config;
    c.head = Head::scalar_value;
    return Seq2SeqModel::create(c, rng);
}

std::vector<double> critic_values(const Seq2SeqModel& critic, std::span<const TokenId> source,
                                  std::span<const TokenId> translation) {
    return critic.prefix_values(source, translation);
}

Var critic_loss(Tape& tape, const Seq2SeqModel& critic, std::span<const TokenId> source,
                std::span<const TokenId> translation, double reward) {
    const std::vector<Var> values = critic.prefix_values(tape, source, translation);
    Var target = tape.constant(Tensor::scalar(reward));
    Var total{};
    for (std::size_t t = 0; t < values.size(); ++t) {
        Var diff = sub(values[t], target);
        Var sq = mul(diff, diff);
        total = t == 0 ? sq : add(total, sq);
    }
    return scale(total, 0.5);
}

std::vector<double> pretrain_critic(Seq2SeqModel& critic, const Seq2SeqModel& nmt, PairBatch train,
                                    const CriticPretrainConfig& config, Rng& rng,
                                    const PairReward& reward) {
    require(!train.empty(), "pretrain_critic: empty training corpus");
    require(config.batch_size >= 1, "pretrain_critic: batch size must be >= 1");
    const PairReward score = reward ? reward : [](const SentencePair& p, std::span<const TokenId> hyp) {
        return expert_rating(hyp, p.target);
    };
    Adam opt(critic.params(), AdamConfig{.learning_rate = config.learning_rate});
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> epoch_loss;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_indices(order, rng);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(start + config.batch_size, order.size());
            for (std::size_t k = start; k < end; ++k) {
                const SentencePair& pair = *train[order[k]];
                Tape sample_tape;
                const SampledTranslation s = nmt.sample(sample_tape, pair.source, rng);
                const double r = score(pair, s.tokens);
                Tape tape;
                Var loss = critic_loss(tape, critic, pair.source, s.tokens, r);
                total += 2.0 * loss.item();
                tape.backward(loss);
            }
            opt.step(critic.params(), 1.0 / static_cast<double>(end - start));
        }
        epoch_loss.push_back(total / static_cast<double>(order.size()));
    }
    return epoch_loss;
}

std::vector<StepOutcome> a2c_batch_step(Seq2SeqModel& actor, Seq2SeqModel& critic, Adam& actor_opt,
                                        Adam& critic_opt, std::span<const BanditItem> batch,
                                        const Feedback& feedback, const Rng& rng) {
    require(critic.config().head == Head::scalar_value, "a2c: critic needs a scalar_value head");
    return policy_gradient_step(actor, &critic, actor_opt, &critic_opt, batch, feedback, rng);
}

std::vector<StepOutcome> reinforce_step(Seq2SeqModel& actor, Adam& actor_opt,
                                        std::span<const BanditItem> batch, const Feedback& feedback,
                                        const Rng& rng) {
    return policy_gradient_step(actor, nullptr, actor_opt, nullptr, batch, feedback, rng);
}

void run_bandit(Seq2SeqModel& actor, Seq2SeqModel* critic,
                std::span<const std::span<const TokenId>> sources, const Feedback& feedback,
                const BanditConfig& config, const Rng& rng, const BanditObserver& observer) {
    require(!sources.empty(), "run_bandit: no bandit sources");
    require(config.batch_size >= 1, "run_bandit: batch size must be >= 1");
    require(config.algorithm != Algorithm::supervised,
            "run_bandit: the supervised baseline needs references; use supervised_finetune_step");
    require(config.algorithm == Algorithm::reinforce || critic != nullptr,
            "run_bandit: a2c needs a critic");
    Adam actor_opt(actor.params(),
                   AdamConfig{.learning_rate = config.actor_learning_rate, .clip_norm = config.clip_norm});
    std::optional<Adam> critic_opt;
    if (config.algorithm == Algorithm::a2c) {
        critic_opt.emplace(critic->params(), AdamConfig{.learning_rate = config.critic_learning_rate,
                                                        .clip_norm = config.clip_norm});
    }
    const Rng order_root = rng.fork("order");
    const Rng sample_root = rng.fork("sample");
    const std::size_t n = sources.size();
    std::vector<std::size_t> order(n);
    std::vector<BanditItem> batch;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng order_rng = order_root.fork(epoch);
        shuffle_indices(order, order_rng);
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            batch.clear();
            for (std::size_t k = start; k < std::min(start + config.batch_size, n); ++k) {
                batch.push_back(BanditItem{sources[order[k]], order[k],
                                           static_cast<std::uint64_t>(epoch * n + order[k])});
            }
            std::vector<StepOutcome> outcomes =
                config.algorithm == Algorithm::a2c
                    ? a2c_batch_step(actor, *critic, actor_opt, *critic_opt, batch, feedback, sample_root)
                    : reinforce_step(actor, actor_opt, batch, feedback, sample_root);
            if (observer) {
                observer(BanditStepReport{epoch, step, &outcomes, batch});
            }
            ++step;
        }
    }
}

std::vector<TokenSeq> enumerate_translations(std::size_t vocab_size, std::size_t max_len) {
    require(vocab_size >= 1 && max_len >= 1, "enumerate_translations: empty instance");
    std::vector<TokenSeq> out;
    std::vector<TokenSeq> frontier{TokenSeq{}};
    for (std::size_t len = 1; len <= max_len; ++len) {
        std::vector<TokenSeq> next;
        for (const TokenSeq& prefix : frontier) {
            for (std::size_t tok = 0; tok < vocab_size; ++tok) {
                TokenSeq seq = prefix;
                seq.push_back(static_cast<TokenId>(tok));
                if (tok == kEos || len == max_len) {
                    out.push_back(std::move(seq));
                } else {
                    next.push_back(std::move(seq));
                }
            }
        }
        frontier = std::move(next);
    }
    return out;
}

std::vector<Tensor> exact_policy_gradient(const Seq2SeqModel& model, std::span<const TokenId> source,
                                          const SequenceReward& reward, std::size_t max_len) {
    const std::size_t v = model.config().tgt_vocab_size;
    require(max_len >= 1, "exact_policy_gradient: max_len must be >= 1");
    double size = 1.0;
    for (std::size_t i = 0; i < max_len; ++i) {
        size *= static_cast<double>(v);
    }
    require(size <= 1e5, "exact_policy_gradient: vocab^max_len exceeds 1e5");

    Seq2SeqModel work = model;
    work.params().zero_grad();
    for (const TokenSeq& y : enumerate_translations(v, max_len)) {
        Tape tape;
        const std::vector<Var> steps = work.token_log_probs(tape, source, y);
        Var log_p = steps.front();
        for (std::size_t t = 1; t < steps.size(); ++t) {
            log_p = add(log_p, steps[t]);
        }
        const double weight = std::exp(log_p.item()) * reward(y);
        // sum_y P(y) R(y) grad log P(y)
        tape.backward(scale(log_p, weight));
    }
    return take_gradients(work.params());
}

GradientSample sample_policy_gradient(const Seq2SeqModel& model, std::span<const TokenId> source,
                                      Rng& rng, const SequenceReward& reward,
                                      const PrefixBaseline& baseline, std::size_t max_len) {
    Seq2SeqModel work = model;
    work.params().zero_grad();
    Tape tape;
    SampledTranslation s = work.sample(tape, source, rng, max_len);
    GradientSample out;
    out.translation = s.tokens;
    out.reward = reward(s.tokens);
    std::vector<double> neg_adv(s.tokens.size());
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
        const double b = baseline ? baseline(std::span<const TokenId>(s.tokens).first(t)) : 0.0;
        neg_adv[t] = -(out.reward - b);
    }
    // actor_backward differentiates -sum adv * log p; negated advantages give
    // the ascent direction.
    actor_backward(tape, s, neg_adv);
    out.gradient = take_gradients(work.params());
    return out;
}

} // namespace banditseq
