#pragma once

#include "banditseq/adam.hpp"
#include "banditseq/corpus.hpp"
#include "banditseq/rng.hpp"
#include "banditseq/seq2seq.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace banditseq {

// ---------------------------------------------------------------------------
// Supervised pre-training
// ---------------------------------------------------------------------------

struct PretrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    // From this (1-based) epoch on, the rate is multiplied by decay_factor after
    // any epoch whose dev perplexity is higher than the previous epoch's.
    std::size_t decay_start_epoch = 5;
    double decay_factor = 0.5;
    double clip_norm = 0.0; // global gradient-norm clip, 0 = off
};

struct EpochLog {
    std::size_t epoch = 0;         // 1-based
    double train_loss = 0.0;       // mean negative log-likelihood per sentence
    double dev_perplexity = 0.0;   // exp(total NLL / total target tokens)
    double learning_rate = 0.0;    // rate used during this epoch
};

class PerplexityDecay {
  public:
    PerplexityDecay(std::size_t start_epoch, double factor) : start_(start_epoch), factor_(factor) {}
    // Learning rate for the epoch after `epoch`, given that epoch's dev perplexity.
    double next_rate(std::size_t epoch, double dev_perplexity, double current_rate);

  private:
    std::size_t start_;
    double factor_;
    double previous_ = 0.0;
    bool has_previous_ = false;
};

using PairBatch = std::span<const SentencePair* const>;

// One MLE mini-batch step: gradients of -log P(y|x) summed over the batch,
// averaged, one Adam update. Returns the mean NLL before the update.
double supervised_batch_step(Seq2SeqModel& model, PairBatch batch, Adam& optimizer);

// Single supervised pass step on the bandit split (the supervised baseline).
inline double supervised_finetune_step(Seq2SeqModel& model, PairBatch batch, Adam& optimizer) {
    return supervised_batch_step(model, batch, optimizer);
}

double dev_perplexity(const Seq2SeqModel& model, PairBatch dev);

std::vector<EpochLog> pretrain_supervised(Seq2SeqModel& model, PairBatch train, PairBatch dev,
                                          const PretrainConfig& config, Rng& rng);

// ---------------------------------------------------------------------------
// Critic
// ---------------------------------------------------------------------------

struct CriticPretrainConfig {
    std::size_t epochs = 5;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
};

// Critic with the same dimensions as the translation model and a scalar head.
Seq2SeqModel make_critic(const Seq2SeqConfig& nmt_config, Rng& rng);

// Reward used while pre-training the critic; defaults to the un-perturbed
// sentence BLEU against the pair's reference.
using PairReward = std::function<double(const SentencePair&, std::span<const TokenId> hyp)>;

// V(y_<t) for t = 1..m, the critic teacher-forced on the given translation.
std::vector<double> critic_values(const Seq2SeqModel& critic, std::span<const TokenId> source,
                                  std::span<const TokenId> translation);

// Half the summed squared error, 0.5 * sum_t (V(y_<t) - R)^2; its gradient is
// sum_t (V - R) dV/domega.
Var critic_loss(Tape& tape, const Seq2SeqModel& critic, std::span<const TokenId> source,
                std::span<const TokenId> translation, double reward);

// Returns the mean per-sentence squared error sum_t (V - R)^2 of each epoch.
std::vector<double> pretrain_critic(Seq2SeqModel& critic, const Seq2SeqModel& nmt, PairBatch train,
                                    const CriticPretrainConfig& config, Rng& rng,
                                    const PairReward& reward = {});

// ---------------------------------------------------------------------------
// Bandit learning
// ---------------------------------------------------------------------------

// Scalar feedback for one round. This is the only channel through which the
// bandit learner observes anything about references.
using Feedback =
    std::function<double(std::size_t item, std::uint64_t round, std::span<const TokenId> hyp)>;

struct BanditItem {
    std::span<const TokenId> source;
    std::size_t item = 0;     // index into the caller's bandit set
    std::uint64_t round = 0;  // unique per (epoch, item); selects the sampling substream
};

struct StepOutcome {
    TokenSeq translation;
    double reward = 0.0;
    std::vector<double> values;     // V(y_<t), all zero for REINFORCE
    std::vector<double> advantages; // reward - values[t]
    double actor_loss = 0.0;        // -sum_t advantage_t * log P(y_t | y_<t, x)
    double critic_loss = 0.0;       // sum_t (V(y_<t) - R)^2
};

// One NED-A2C update over a batch: one sample per source drawn from
// rng.fork(round), reward from feedback, critic values for every prefix,
// actor gradient sum_t (R - V_t) grad log P(y_t), critic gradient
// sum_t (V_t - R) grad V_t, both averaged over the batch; then one Adam step
// for the actor followed by one for the critic.
std::vector<StepOutcome> a2c_batch_step(Seq2SeqModel& actor, Seq2SeqModel& critic, Adam& actor_opt,
                                        Adam& critic_opt, std::span<const BanditItem> batch,
                                        const Feedback& feedback, const Rng& rng);

// The same update with V = 0 and no critic.
std::vector<StepOutcome> reinforce_step(Seq2SeqModel& actor, Adam& actor_opt,
                                        std::span<const BanditItem> batch, const Feedback& feedback,
                                        const Rng& rng);

enum class Algorithm { a2c, reinforce, supervised };

struct BanditConfig {
    Algorithm algorithm = Algorithm::a2c;
    std::size_t epochs = 1;
    std::size_t batch_size = 64;
    double actor_learning_rate = 1e-4;
    double critic_learning_rate = 1e-4;
    double clip_norm = 0.0;
};

struct BanditStepReport {
    std::size_t epoch = 0; // 0-based
    std::size_t step = 0;  // global batch counter, 0-based
    const std::vector<StepOutcome>* outcomes = nullptr;
    std::span<const BanditItem> items;
};

using BanditObserver = std::function<void(const BanditStepReport&)>;

// Runs config.epochs passes over the sources with a2c or reinforce. Each epoch
// visits the sources in a freshly shuffled order. Source i in epoch e is
// round e * N + i, so its sample and rating substreams do not depend on the
// visiting order. critic may be null only for reinforce.
void run_bandit(Seq2SeqModel& actor, Seq2SeqModel* critic,
                std::span<const std::span<const TokenId>> sources, const Feedback& feedback,
                const BanditConfig& config, const Rng& rng, const BanditObserver& observer = {});

// ---------------------------------------------------------------------------
// Policy-gradient oracles (tiny instances)
// ---------------------------------------------------------------------------

using SequenceReward = std::function<double(std::span<const TokenId> translation)>;
// b(y_<t): any function of the prefix only.
using PrefixBaseline = std::function<double(std::span<const TokenId> prefix)>;

// Every complete translation of length <= max_len: sequences ending at their
// first EOS, plus EOS-free sequences truncated at max_len.
std::vector<TokenSeq> enumerate_translations(std::size_t vocab_size, std::size_t max_len);

// Exact gradient of E_{y ~ P}[R(y)] by enumeration, in ParamStore entry order.
// Requires vocab_size^max_len <= 1e5 and a deterministic reward.
std::vector<Tensor> exact_policy_gradient(const Seq2SeqModel& model, std::span<const TokenId> source,
                                          const SequenceReward& reward, std::size_t max_len);

struct GradientSample {
    TokenSeq translation;
    double reward = 0.0;
    std::vector<Tensor> gradient; // sum_t (R - b(y_<t)) grad log P(y_t | y_<t), entry order
};

// One draw of the single-sample baseline-centred estimator (ascent direction).
GradientSample sample_policy_gradient(const Seq2SeqModel& model, std::span<const TokenId> source,
                                      Rng& rng, const SequenceReward& reward,
                                      const PrefixBaseline& baseline, std::size_t max_len);

} // namespace banditseq
