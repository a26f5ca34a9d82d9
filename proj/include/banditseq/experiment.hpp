#pragma once

#include "banditseq/bandit.hpp"
#include "banditseq/corpus.hpp"
#include "banditseq/rater.hpp"
#include "banditseq/seq2seq.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace banditseq {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct TaskConfig {
    std::string kind = "cipher"; // "cipher" or "files"
    CipherSpec cipher;
    // kind == "files"
    std::string source_path;
    std::string target_path;
    std::size_t vocab_cap = 50000;
    std::uint64_t split_seed = 1;
    std::array<double, kSplitCount> fractions{0.6, 0.25, 0.075, 0.075};
};

struct ModelConfig {
    std::size_t embed_dim = 32;
    std::size_t hidden_dim = 32;
};

struct PretrainSettings {
    PretrainConfig nmt;
    CriticPretrainConfig critic;
    // The reference model and its critic are trained once per experiment from
    // this seed and shared by every bandit seed.
    std::uint64_t seed = 1;
};

// One experiment per value; each value replaces the rater perturbation list
// with a single perturbation of the named kind.
struct SweepConfig {
    std::string parameter; // "g", "lambda" or "rho"
    std::vector<double> values;
};

struct ExperimentConfig {
    std::string experiment_id = "experiment";
    std::string preset = "custom";
    TaskConfig task;
    ModelConfig model;
    RaterConfig rater;
    PretrainSettings pretrain;
    BanditConfig bandit;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out_dir = "runs";
    std::string cache_dir; // empty: <out_dir>/cache
    std::size_t jobs = 1;  // seeds run concurrently up to this many threads
    std::optional<SweepConfig> sweep;

    // Throws ConfigError.
    void validate() const;
    std::filesystem::path cache_path() const;
};

// Throws ConfigError on unknown keys, wrong types or invalid values. Missing
// keys take the defaults above.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

std::vector<std::string> preset_names();
// Throws ConfigError for an unknown name.
ExperimentConfig make_preset(std::string_view name);

// Replaces the rater's perturbations with the single perturbation a sweep
// value stands for.
RaterConfig rater_for_sweep_value(const RaterConfig& base, std::string_view parameter, double value);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// Mean un-perturbed sentence BLEU of one sampled translation per pair; pair i
// draws from rng.fork(i).
double per_sentence_bleu_metric(const Seq2SeqModel& model, PairBatch split, const Rng& rng);

// Corpus BLEU of greedy decodes.
double heldout_bleu_metric(const Seq2SeqModel& model, PairBatch test);

inline double delta_metric(double after, double reference) { return after - reference; }

struct Interval {
    double mean = 0.0;
    double half_width = 0.0;
    double low() const { return mean - half_width; }
    double high() const { return mean + half_width; }
};

// Student-t 95% interval, mean +- t(0.975, n-1) * sd / sqrt(n). n >= 2.
Interval confidence_interval(std::span<const double> values);

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct RunRecord {
    std::uint64_t seed = 0;
    std::string phase; // reference, critic, bandit, final, failed
    std::size_t epoch = 0;
    std::size_t step = 0;
    double online_reward = 0.0;  // running mean of the rewards fed to the learner
    double sentence_bleu = 0.0;  // running mean of un-perturbed BLEU of the same samples
    std::optional<double> heldout_bleu;
    std::optional<double> critic_loss;
    double wall_seconds = 0.0;
    std::string note;
};

struct SeedResult {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double reference_sentence_bleu = 0.0;
    double final_sentence_bleu = 0.0;
    double reference_heldout_bleu = 0.0;
    double final_heldout_bleu = 0.0;
    std::vector<RunRecord> records;

    double delta_sentence_bleu() const {
        return delta_metric(final_sentence_bleu, reference_sentence_bleu);
    }
    double delta_heldout_bleu() const { return delta_metric(final_heldout_bleu, reference_heldout_bleu); }
};

struct SummaryRow {
    std::string experiment_id;
    std::string preset;
    std::string seed; // seed number, or "mean" for the aggregate row
    std::string metric;
    std::string phase;
    double value = 0.0;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<SeedResult> seeds; // in config.seeds order
    std::vector<SummaryRow> summary;

    std::vector<double> deltas(std::string_view metric) const; // successful seeds only
    std::optional<Interval> delta_interval(std::string_view metric) const;
};

// The reference model and critic, trained or loaded from the checkpoint cache.
struct ReferenceModels {
    Seq2SeqModel nmt;
    Seq2SeqModel critic;
    std::vector<EpochLog> pretrain_log;   // empty when loaded from cache
    std::vector<double> critic_log;       // empty when loaded from cache
    bool from_cache = false;
};

Corpus build_corpus(const TaskConfig& task);
ReferenceModels prepare_reference(const ExperimentConfig& config, const Corpus& corpus);

// One bandit seed against an already prepared reference. Throws on failure.
SeedResult run_seed(const ExperimentConfig& config, const Corpus& corpus, const ReferenceModels& ref,
                    std::uint64_t seed);

// Full protocol for a single configuration (config.sweep ignored). Seed
// failures are captured in SeedResult and a "failed" record.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Runs and writes <out_dir>/summary.csv, records.csv, config.json and
// online_reward.svg. With a sweep, each value runs in <out_dir>/<label> and a
// combined summary.csv plus delta_vs_<parameter>.svg go in out_dir.
std::vector<ExperimentResult> run_and_report(const ExperimentConfig& config);

std::vector<SummaryRow> summarize(const ExperimentConfig& config, std::span<const SeedResult> seeds);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

enum class ReportFormat { csv, svg };

// csv: one row per record under a header. svg: online reward against step,
// one polyline per seed. Throws IoError when the path cannot be written.
void emit_report(std::span<const RunRecord> records, ReportFormat format,
                 const std::filesystem::path& path);

void write_summary_csv(std::span<const SummaryRow> rows, const std::filesystem::path& path);
std::vector<RunRecord> read_records_csv(const std::filesystem::path& path);

struct SweepPoint {
    double x = 0.0;
    Interval delta;
};
// Delta against the sweep parameter with CI whiskers.
void write_sweep_svg(std::span<const SweepPoint> points, std::string_view parameter,
                     std::string_view metric, const std::filesystem::path& path);

} // namespace banditseq
