#include "banditseq/experiment.hpp"

#include "banditseq/bleu.hpp"
#include "banditseq/errors.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

namespace banditseq {

namespace {

using nlohmann::json;

// ---- json helpers ----------------------------------------------------------

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) {
        throw ConfigError(std::string(where) + ": expected a JSON object");
    }
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError(std::string(where) + ": unknown key \"" + key + "\"");
        }
    }
}

template <typename T>
void read(const json& obj, std::string_view where, const char* key, T& out) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        return;
    }
    try {
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
            if (!it->is_number_unsigned()) {
                throw ConfigError(std::string(where) + "." + key + ": expected a non-negative integer");
            }
        } else if constexpr (std::is_same_v<T, int>) {
            if (!it->is_number_integer()) {
                throw ConfigError(std::string(where) + "." + key + ": expected an integer");
            }
        } else if constexpr (std::is_same_v<T, double>) {
            if (!it->is_number()) {
                throw ConfigError(std::string(where) + "." + key + ": expected a number");
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!it->is_string()) {
                throw ConfigError(std::string(where) + "." + key + ": expected a string");
            }
        }
        out = it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(where) + "." + key + ": " + e.what());
    }
}

std::string algorithm_name(Algorithm a) {
    switch (a) {
    case Algorithm::a2c:
        return "a2c";
    case Algorithm::reinforce:
        return "reinforce";
    case Algorithm::supervised:
        return "supervised";
    }
    return "a2c";
}

Algorithm parse_algorithm(const std::string& name) {
    if (name == "a2c") {
        return Algorithm::a2c;
    }
    if (name == "reinforce") {
        return Algorithm::reinforce;
    }
    if (name == "supervised") {
        return Algorithm::supervised;
    }
    throw ConfigError("bandit.algorithm: unknown algorithm \"" + name + "\"");
}

json perturbation_to_json(const Perturbation& p) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Granular>) {
                return {{"type", "granular"}, {"g", v.g}};
            } else if constexpr (std::is_same_v<T, Variance>) {
                return {{"type", "variance"}, {"lambda", v.lambda}};
            } else {
                return {{"type", "skew"}, {"rho", v.rho}};
            }
        },
        p);
}

Perturbation perturbation_from_json(const json& j) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
        throw ConfigError("rater.perturbations: each entry needs a string \"type\"");
    }
    const std::string type = j["type"].get<std::string>();
    if (type == "granular") {
        check_keys(j, "rater.perturbations[granular]", {"type", "g"});
        Granular g;
        read(j, "granular", "g", g.g);
        return g;
    }
    if (type == "variance") {
        check_keys(j, "rater.perturbations[variance]", {"type", "lambda"});
        Variance v;
        read(j, "variance", "lambda", v.lambda);
        return v;
    }
    if (type == "skew") {
        check_keys(j, "rater.perturbations[skew]", {"type", "rho"});
        Skew s;
        read(j, "skew", "rho", s.rho);
        return s;
    }
    throw ConfigError("rater.perturbations: unknown type \"" + type + "\"");
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::uint64_t noise_seed_for(const RaterConfig& rater, std::uint64_t seed) {
    return Rng(rater.noise_seed).fork(seed).next();
}

} // namespace

// ---- configuration -----------------------------------------------------------

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (experiment_id.empty()) {
        fail("experiment_id must not be empty");
    }
    if (task.kind == "cipher") {
        const CipherSpec& c = task.cipher;
        if (c.vocab_size < 4) {
            fail("task.vocab_size must be >= 4");
        }
        if (c.min_length < 1 || c.min_length > c.max_length || c.max_length > kMaxSentenceLength) {
            fail("task length range must satisfy 1 <= min_length <= max_length <= 50");
        }
        if (c.pair_count < 1) {
            fail("task.pair_count must be >= 1");
        }
        if (c.reorder_window < 1) {
            fail("task.reorder_window must be >= 1");
        }
    } else if (task.kind == "files") {
        if (task.source_path.empty() || task.target_path.empty()) {
            fail("task.source_path and task.target_path are required for kind \"files\"");
        }
    } else {
        fail("task.kind must be \"cipher\" or \"files\"");
    }
    const auto& fr = task.kind == "cipher" ? task.cipher.fractions : task.fractions;
    double sum = 0.0;
    for (double f : fr) {
        if (!(f >= 0.0)) {
            fail("task.fractions must be non-negative");
        }
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        fail("task.fractions must sum to 1");
    }
    if (model.embed_dim < 1 || model.hidden_dim < 1) {
        fail("model dimensions must be >= 1");
    }
    try {
        rater.validate();
    } catch (const ContractViolation& e) {
        fail(std::string("rater: ") + e.what());
    }
    if (pretrain.nmt.batch_size < 1 || pretrain.critic.batch_size < 1 || bandit.batch_size < 1) {
        fail("batch sizes must be >= 1");
    }
    if (!(pretrain.nmt.learning_rate > 0.0) || !(pretrain.critic.learning_rate > 0.0) ||
        !(bandit.actor_learning_rate > 0.0) || !(bandit.critic_learning_rate > 0.0)) {
        fail("learning rates must be > 0");
    }
    if (!(pretrain.nmt.decay_factor > 0.0 && pretrain.nmt.decay_factor <= 1.0)) {
        fail("pretrain.decay_factor must be in (0, 1]");
    }
    if (!(bandit.clip_norm >= 0.0) || !(pretrain.nmt.clip_norm >= 0.0)) {
        fail("clip_norm must be >= 0");
    }
    if (seeds.empty()) {
        fail("seeds must list at least one seed");
    }
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        fail("seeds must be distinct");
    }
    if (jobs < 1) {
        fail("jobs must be >= 1");
    }
    if (sweep) {
        if (sweep->parameter != "g" && sweep->parameter != "lambda" && sweep->parameter != "rho") {
            fail("sweep.parameter must be g, lambda or rho");
        }
        if (sweep->values.empty()) {
            fail("sweep.values must not be empty");
        }
        for (double v : sweep->values) {
            try {
                rater_for_sweep_value(rater, sweep->parameter, v).validate();
            } catch (const ContractViolation& e) {
                fail(std::string("sweep value: ") + e.what());
            }
        }
    }
}

std::filesystem::path ExperimentConfig::cache_path() const {
    return cache_dir.empty() ? std::filesystem::path(out_dir) / "cache" : std::filesystem::path(cache_dir);
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    check_keys(j, "config",
               {"experiment_id", "preset", "task", "model", "rater", "pretrain", "bandit", "seeds",
                "out_dir", "cache_dir", "jobs", "sweep"});
    read(j, "config", "experiment_id", c.experiment_id);
    read(j, "config", "preset", c.preset);
    read(j, "config", "out_dir", c.out_dir);
    read(j, "config", "cache_dir", c.cache_dir);
    read(j, "config", "jobs", c.jobs);

    if (j.contains("task")) {
        const json& t = j["task"];
        check_keys(t, "task",
                   {"kind", "vocab_size", "min_length", "max_length", "pair_count", "reorder_window",
                    "seed", "fractions", "source_path", "target_path", "vocab_cap", "split_seed"});
        read(t, "task", "kind", c.task.kind);
        read(t, "task", "vocab_size", c.task.cipher.vocab_size);
        read(t, "task", "min_length", c.task.cipher.min_length);
        read(t, "task", "max_length", c.task.cipher.max_length);
        read(t, "task", "pair_count", c.task.cipher.pair_count);
        read(t, "task", "reorder_window", c.task.cipher.reorder_window);
        read(t, "task", "seed", c.task.cipher.seed);
        read(t, "task", "source_path", c.task.source_path);
        read(t, "task", "target_path", c.task.target_path);
        read(t, "task", "vocab_cap", c.task.vocab_cap);
        read(t, "task", "split_seed", c.task.split_seed);
        if (t.contains("fractions")) {
            const json& f = t["fractions"];
            if (!f.is_array() || f.size() != kSplitCount) {
                throw ConfigError("task.fractions: expected an array of 4 numbers");
            }
            for (std::size_t k = 0; k < kSplitCount; ++k) {
                if (!f[k].is_number()) {
                    throw ConfigError("task.fractions: expected numbers");
                }
                c.task.fractions[k] = f[k].get<double>();
            }
            c.task.cipher.fractions = c.task.fractions;
        }
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        check_keys(m, "model", {"embed_dim", "hidden_dim"});
        read(m, "model", "embed_dim", c.model.embed_dim);
        read(m, "model", "hidden_dim", c.model.hidden_dim);
    }
    if (j.contains("rater")) {
        const json& r = j["rater"];
        check_keys(r, "rater", {"noise_seed", "perturbations"});
        read(r, "rater", "noise_seed", c.rater.noise_seed);
        if (r.contains("perturbations")) {
            if (!r["perturbations"].is_array()) {
                throw ConfigError("rater.perturbations: expected an array");
            }
            for (const json& p : r["perturbations"]) {
                c.rater.perturbations.push_back(perturbation_from_json(p));
            }
        }
    }
    if (j.contains("pretrain")) {
        const json& p = j["pretrain"];
        check_keys(p, "pretrain",
                   {"seed", "epochs", "batch_size", "learning_rate", "decay_start_epoch", "decay_factor",
                    "clip_norm", "critic_epochs", "critic_batch_size", "critic_learning_rate"});
        read(p, "pretrain", "seed", c.pretrain.seed);
        read(p, "pretrain", "epochs", c.pretrain.nmt.epochs);
        read(p, "pretrain", "batch_size", c.pretrain.nmt.batch_size);
        read(p, "pretrain", "learning_rate", c.pretrain.nmt.learning_rate);
        read(p, "pretrain", "decay_start_epoch", c.pretrain.nmt.decay_start_epoch);
        read(p, "pretrain", "decay_factor", c.pretrain.nmt.decay_factor);
        read(p, "pretrain", "clip_norm", c.pretrain.nmt.clip_norm);
        read(p, "pretrain", "critic_epochs", c.pretrain.critic.epochs);
        read(p, "pretrain", "critic_batch_size", c.pretrain.critic.batch_size);
        read(p, "pretrain", "critic_learning_rate", c.pretrain.critic.learning_rate);
    }
    if (j.contains("bandit")) {
        const json& b = j["bandit"];
        check_keys(b, "bandit",
                   {"algorithm", "epochs", "batch_size", "actor_learning_rate", "critic_learning_rate",
                    "clip_norm"});
        std::string algorithm = algorithm_name(c.bandit.algorithm);
        read(b, "bandit", "algorithm", algorithm);
        c.bandit.algorithm = parse_algorithm(algorithm);
        read(b, "bandit", "epochs", c.bandit.epochs);
        read(b, "bandit", "batch_size", c.bandit.batch_size);
        read(b, "bandit", "actor_learning_rate", c.bandit.actor_learning_rate);
        read(b, "bandit", "critic_learning_rate", c.bandit.critic_learning_rate);
        read(b, "bandit", "clip_norm", c.bandit.clip_norm);
    }
    if (j.contains("seeds")) {
        const json& s = j["seeds"];
        if (!s.is_array()) {
            throw ConfigError("seeds: expected an array of non-negative integers");
        }
        c.seeds.clear();
        for (const json& v : s) {
            if (!v.is_number_unsigned()) {
                throw ConfigError("seeds: expected an array of non-negative integers");
            }
            c.seeds.push_back(v.get<std::uint64_t>());
        }
    }
    if (j.contains("sweep") && !j["sweep"].is_null()) {
        const json& s = j["sweep"];
        check_keys(s, "sweep", {"parameter", "values"});
        SweepConfig sw;
        read(s, "sweep", "parameter", sw.parameter);
        if (!s.contains("values") || !s["values"].is_array()) {
            throw ConfigError("sweep.values: expected an array of numbers");
        }
        for (const json& v : s["values"]) {
            if (!v.is_number()) {
                throw ConfigError("sweep.values: expected an array of numbers");
            }
            sw.values.push_back(v.get<double>());
        }
        c.sweep = sw;
    }
    c.validate();
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json perturbations = json::array();
    for (const Perturbation& p : c.rater.perturbations) {
        perturbations.push_back(perturbation_to_json(p));
    }
    const auto& fr = c.task.kind == "cipher" ? c.task.cipher.fractions : c.task.fractions;
    json j = {
        {"experiment_id", c.experiment_id},
        {"preset", c.preset},
        {"task",
         {{"kind", c.task.kind},
          {"vocab_size", c.task.cipher.vocab_size},
          {"min_length", c.task.cipher.min_length},
          {"max_length", c.task.cipher.max_length},
          {"pair_count", c.task.cipher.pair_count},
          {"reorder_window", c.task.cipher.reorder_window},
          {"seed", c.task.cipher.seed},
          {"fractions", fr},
          {"source_path", c.task.source_path},
          {"target_path", c.task.target_path},
          {"vocab_cap", c.task.vocab_cap},
          {"split_seed", c.task.split_seed}}},
        {"model", {{"embed_dim", c.model.embed_dim}, {"hidden_dim", c.model.hidden_dim}}},
        {"rater", {{"noise_seed", c.rater.noise_seed}, {"perturbations", perturbations}}},
        {"pretrain",
         {{"seed", c.pretrain.seed},
          {"epochs", c.pretrain.nmt.epochs},
          {"batch_size", c.pretrain.nmt.batch_size},
          {"learning_rate", c.pretrain.nmt.learning_rate},
          {"decay_start_epoch", c.pretrain.nmt.decay_start_epoch},
          {"decay_factor", c.pretrain.nmt.decay_factor},
          {"clip_norm", c.pretrain.nmt.clip_norm},
          {"critic_epochs", c.pretrain.critic.epochs},
          {"critic_batch_size", c.pretrain.critic.batch_size},
          {"critic_learning_rate", c.pretrain.critic.learning_rate}}},
        {"bandit",
         {{"algorithm", algorithm_name(c.bandit.algorithm)},
          {"epochs", c.bandit.epochs},
          {"batch_size", c.bandit.batch_size},
          {"actor_learning_rate", c.bandit.actor_learning_rate},
          {"critic_learning_rate", c.bandit.critic_learning_rate},
          {"clip_norm", c.bandit.clip_norm}}},
        {"seeds", c.seeds},
        {"out_dir", c.out_dir},
        {"cache_dir", c.cache_dir},
        {"jobs", c.jobs},
    };
    if (c.sweep) {
        j["sweep"] = {{"parameter", c.sweep->parameter}, {"values", c.sweep->values}};
    }
    return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << config_to_json(config).dump(2) << '\n';
}

RaterConfig rater_for_sweep_value(const RaterConfig& base, std::string_view parameter, double value) {
    RaterConfig r = base;
    r.perturbations.clear();
    if (parameter == "g") {
        const double rounded = std::round(value);
        require(std::abs(rounded - value) < 1e-9, "granularity must be an integer");
        r.perturbations.push_back(Granular{static_cast<int>(rounded)});
    } else if (parameter == "lambda") {
        r.perturbations.push_back(Variance{value});
    } else if (parameter == "rho") {
        r.perturbations.push_back(Skew{value});
    } else {
        throw ContractViolation("unknown sweep parameter " + std::string(parameter));
    }
    return r;
}

// ---- presets -------------------------------------------------------------------

namespace {

ExperimentConfig desk_base(std::string name) {
    ExperimentConfig c;
    c.experiment_id = name;
    c.preset = name;
    c.out_dir = "runs/" + name;
    c.cache_dir = "runs/cache";
    c.model = ModelConfig{32, 32};
    c.pretrain.nmt.epochs = 10;
    c.pretrain.nmt.batch_size = 2;
    c.pretrain.nmt.learning_rate = 1e-2;
    c.pretrain.nmt.decay_start_epoch = 5;
    c.pretrain.critic.epochs = 3;
    c.pretrain.critic.batch_size = 16;
    c.pretrain.critic.learning_rate = 1e-3;
    c.bandit.algorithm = Algorithm::a2c;
    c.bandit.epochs = 1;
    c.bandit.batch_size = 8;
    c.bandit.actor_learning_rate = 1e-3;
    c.bandit.critic_learning_rate = 1e-3;
    return c;
}

} // namespace

std::vector<std::string> preset_names() {
    return {"table2-desk", "table2-desk-weak", "table2-desk-reinforce", "table2-desk-supervised",
            "gran-sweep", "var-sweep", "skew-sweep", "epochs-desk"};
}

ExperimentConfig make_preset(std::string_view name) {
    ExperimentConfig c = desk_base(std::string(name));
    if (name == "table2-desk") {
        return c;
    }
    if (name == "table2-desk-weak") {
        c.pretrain.nmt.epochs = 1;
        return c;
    }
    if (name == "table2-desk-reinforce") {
        c.bandit.algorithm = Algorithm::reinforce;
        return c;
    }
    if (name == "table2-desk-supervised") {
        c.bandit.algorithm = Algorithm::supervised;
        return c;
    }
    // Perturbation sweeps start from the one-epoch reference: the ten-epoch
    // desk model samples at BLEU ~0.97, where coarse feedback is almost
    // always the top bin and carries no signal.
    if (name == "gran-sweep") {
        c.pretrain.nmt.epochs = 1;
        c.sweep = SweepConfig{"g", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}};
        return c;
    }
    if (name == "var-sweep") {
        c.pretrain.nmt.epochs = 1;
        c.sweep = SweepConfig{"lambda", {0.1, 0.2, 0.5, 1, 2, 5}};
        return c;
    }
    if (name == "skew-sweep") {
        c.pretrain.nmt.epochs = 1;
        c.sweep = SweepConfig{"rho", {0.25, 0.5, 0.67, 1, 1.5, 2, 4}};
        return c;
    }
    if (name == "epochs-desk") {
        c.bandit.epochs = 5;
        return c;
    }
    throw ConfigError("unknown preset \"" + std::string(name) + "\"");
}

// ---- metrics ---------------------------------------------------------------------

double per_sentence_bleu_metric(const Seq2SeqModel& model, PairBatch split, const Rng& rng) {
    require(!split.empty(), "per_sentence_bleu_metric: empty split");
    double total = 0.0;
    for (std::size_t i = 0; i < split.size(); ++i) {
        Rng r = rng.fork(static_cast<std::uint64_t>(i));
        Tape tape;
        const SampledTranslation s = model.sample(tape, split[i]->source, r);
        total += expert_rating(s.tokens, split[i]->target);
    }
    return total / static_cast<double>(split.size());
}

double heldout_bleu_metric(const Seq2SeqModel& model, PairBatch test) {
    require(!test.empty(), "heldout_bleu_metric: empty split");
    std::vector<TokenSeq> hyps;
    std::vector<TokenSeq> refs;
    hyps.reserve(test.size());
    refs.reserve(test.size());
    for (const SentencePair* p : test) {
        const TokenSeq h = model.greedy_decode(p->source);
        const auto hs = strip_eos(h);
        const auto rs = strip_eos(p->target);
        hyps.emplace_back(hs.begin(), hs.end());
        refs.emplace_back(rs.begin(), rs.end());
    }
    return corpus_bleu(hyps, refs);
}

Interval confidence_interval(std::span<const double> values) {
    require(values.size() >= 2, "confidence_interval needs at least two values");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / (n - 1.0));
    const boost::math::students_t dist(n - 1.0);
    const double t = boost::math::quantile(dist, 0.975);
    return Interval{mean, t * sd / std::sqrt(n)};
}

// ---- runs --------------------------------------------------------------------------

Corpus build_corpus(const TaskConfig& task) {
    if (task.kind == "cipher") {
        return gen_cipher_corpus(task.cipher).corpus;
    }
    Corpus c = load_parallel_text(task.source_path, task.target_path, task.vocab_cap);
    split_corpus(c, task.fractions, task.split_seed);
    return c;
}

namespace {

Seq2SeqConfig nmt_config(const ExperimentConfig& config, const Corpus& corpus) {
    Seq2SeqConfig m;
    m.src_vocab_size = corpus.source_vocab.size();
    m.tgt_vocab_size = corpus.target_vocab.size();
    m.embed_dim = config.model.embed_dim;
    m.hidden_dim = config.model.hidden_dim;
    return m;
}

std::string reference_key(const ExperimentConfig& config) {
    json j = config_to_json(config);
    json key = {{"task", j["task"]}, {"model", j["model"]}, {"pretrain", j["pretrain"]}};
    return hex64(fnv1a64(key.dump()));
}

std::mutex& cache_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

ReferenceModels prepare_reference(const ExperimentConfig& config, const Corpus& corpus) {
    const Seq2SeqConfig mc = nmt_config(config, corpus);
    const std::filesystem::path dir = config.cache_path();
    const std::string key = reference_key(config);
    const auto nmt_path = dir / ("nmt-" + key + ".bsq");
    const auto critic_path = dir / ("critic-" + key + ".bsq");

    std::lock_guard lock(cache_mutex());
    if (std::filesystem::exists(nmt_path) && std::filesystem::exists(critic_path)) {
        Seq2SeqConfig cc = mc;
        cc.head = Head::scalar_value;
        return ReferenceModels{Seq2SeqModel(mc, ParamStore::load_file(nmt_path)),
                               Seq2SeqModel(cc, ParamStore::load_file(critic_path)), {}, {}, true};
    }

    const Rng root(config.pretrain.seed);
    Rng init_rng = root.fork("nmt-init");
    Seq2SeqModel nmt = Seq2SeqModel::create(mc, init_rng);
    Rng train_rng = root.fork("nmt-train");
    const auto sup = corpus.split(Split::supervised);
    const auto dev = corpus.split(Split::dev);
    std::vector<EpochLog> log = pretrain_supervised(nmt, sup, dev, config.pretrain.nmt, train_rng);

    Rng critic_init = root.fork("critic-init");
    Seq2SeqModel critic = make_critic(mc, critic_init);
    Rng critic_rng = root.fork("critic-train");
    std::vector<double> critic_log = pretrain_critic(critic, nmt, sup, config.pretrain.critic, critic_rng);

    std::filesystem::create_directories(dir);
    nmt.params().save_file(nmt_path);
    critic.params().save_file(critic_path);
    return ReferenceModels{std::move(nmt), std::move(critic), std::move(log), std::move(critic_log), false};
}

SeedResult run_seed(const ExperimentConfig& config, const Corpus& corpus, const ReferenceModels& ref,
                    std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    SeedResult result;
    result.seed = seed;
    const Rng root(seed);
    const auto bandit_pairs = corpus.split(Split::bandit);
    const auto test_pairs = corpus.split(Split::test);
    require(!bandit_pairs.empty(), "bandit split is empty");
    require(!test_pairs.empty(), "test split is empty");

    Seq2SeqModel actor = ref.nmt;
    Seq2SeqModel critic = ref.critic;

    // The reference samples use the substreams of the first bandit epoch, so
    // S_ref and the online metric see the same random draws until the
    // parameters start to move.
    const Rng sample_root = root.fork("bandit").fork("sample");
    result.reference_sentence_bleu = per_sentence_bleu_metric(actor, bandit_pairs, sample_root);
    result.reference_heldout_bleu = heldout_bleu_metric(actor, test_pairs);
    RunRecord rr;
    rr.seed = seed;
    rr.phase = "reference";
    rr.online_reward = result.reference_sentence_bleu;
    rr.sentence_bleu = result.reference_sentence_bleu;
    rr.heldout_bleu = result.reference_heldout_bleu;
    rr.wall_seconds = seconds_since(start);
    result.records.push_back(rr);

    RaterConfig rater = config.rater;
    rater.noise_seed = noise_seed_for(config.rater, seed);

    // Running means restart at each epoch; the last epoch's mean is the
    // online Per-Sentence BLEU of the run.
    double reward_sum = 0.0;
    double bleu_sum = 0.0;
    std::size_t rated = 0;
    std::size_t current_epoch = 0;
    auto account = [&](std::size_t epoch, std::size_t step, std::span<const std::size_t> items,
                       std::span<const TokenSeq> hyps, std::span<const double> rewards,
                       std::optional<double> critic_loss) {
        if (epoch != current_epoch) {
            current_epoch = epoch;
            reward_sum = bleu_sum = 0.0;
            rated = 0;
        }
        for (std::size_t k = 0; k < items.size(); ++k) {
            reward_sum += rewards[k];
            bleu_sum += expert_rating(hyps[k], bandit_pairs[items[k]]->target);
            ++rated;
        }
        RunRecord rec;
        rec.seed = seed;
        rec.phase = "bandit";
        rec.epoch = epoch;
        rec.step = step;
        rec.online_reward = reward_sum / static_cast<double>(rated);
        rec.sentence_bleu = bleu_sum / static_cast<double>(rated);
        rec.critic_loss = critic_loss;
        rec.wall_seconds = seconds_since(start);
        result.records.push_back(rec);
    };

    const BanditConfig& bc = config.bandit;
    if (bc.epochs > 0 && bc.algorithm == Algorithm::supervised) {
        // Supervised baseline: full references on the bandit split. Each
        // sentence is also sampled once before its update so the online
        // metric is measured the same way as for the bandit learners.
        Adam opt(actor.params(), AdamConfig{.learning_rate = bc.actor_learning_rate, .clip_norm = bc.clip_norm});
        const Rng order_root = root.fork("bandit").fork("order");
        const std::size_t n = bandit_pairs.size();
        std::vector<std::size_t> order(n);
        std::size_t step = 0;
        for (std::size_t epoch = 0; epoch < bc.epochs; ++epoch) {
            std::iota(order.begin(), order.end(), 0);
            Rng order_rng = order_root.fork(epoch);
            for (std::size_t i = n; i > 1; --i) {
                std::swap(order[i - 1], order[order_rng.below(i)]);
            }
            for (std::size_t s = 0; s < n; s += bc.batch_size) {
                std::vector<std::size_t> items;
                std::vector<TokenSeq> hyps;
                std::vector<double> rewards;
                std::vector<const SentencePair*> batch;
                for (std::size_t k = s; k < std::min(s + bc.batch_size, n); ++k) {
                    const SentencePair* p = bandit_pairs[order[k]];
                    Rng r = sample_root.fork(static_cast<std::uint64_t>(epoch * n + order[k]));
                    Tape tape;
                    hyps.push_back(actor.sample(tape, p->source, r).tokens);
                    rewards.push_back(expert_rating(hyps.back(), p->target));
                    items.push_back(order[k]);
                    batch.push_back(p);
                }
                account(epoch, step++, items, hyps, rewards, std::nullopt);
                supervised_finetune_step(actor, batch, opt);
            }
        }
    } else if (bc.epochs > 0) {
        std::vector<std::span<const TokenId>> sources;
        sources.reserve(bandit_pairs.size());
        for (const SentencePair* p : bandit_pairs) {
            sources.emplace_back(p->source);
        }
        // The only route from references to the learner.
        const Feedback feedback = [&](std::size_t item, std::uint64_t round, std::span<const TokenId> hyp) {
            return rate(hyp, bandit_pairs[item]->target, rater, round);
        };
        const BanditObserver observer = [&](const BanditStepReport& rep) {
            std::vector<std::size_t> items;
            std::vector<TokenSeq> hyps;
            std::vector<double> rewards;
            double closs = 0.0;
            for (std::size_t k = 0; k < rep.items.size(); ++k) {
                const StepOutcome& o = (*rep.outcomes)[k];
                items.push_back(rep.items[k].item);
                hyps.push_back(o.translation);
                rewards.push_back(o.reward);
                closs += o.critic_loss;
            }
            std::optional<double> critic_loss;
            if (bc.algorithm == Algorithm::a2c) {
                critic_loss = closs / static_cast<double>(rep.items.size());
            }
            account(rep.epoch, rep.step, items, hyps, rewards, critic_loss);
        };
        run_bandit(actor, bc.algorithm == Algorithm::a2c ? &critic : nullptr, sources, feedback, bc,
                   root.fork("bandit"), observer);
    }

    if (bc.epochs > 0) {
        result.final_sentence_bleu = bleu_sum / static_cast<double>(rated);
        result.final_heldout_bleu = heldout_bleu_metric(actor, test_pairs);
    } else {
        result.final_sentence_bleu = result.reference_sentence_bleu;
        result.final_heldout_bleu = result.reference_heldout_bleu;
    }
    RunRecord fr;
    fr.seed = seed;
    fr.phase = "final";
    fr.epoch = bc.epochs;
    fr.online_reward = result.final_sentence_bleu;
    fr.sentence_bleu = result.final_sentence_bleu;
    fr.heldout_bleu = result.final_heldout_bleu;
    fr.wall_seconds = seconds_since(start);
    result.records.push_back(fr);
    result.ok = true;
    return result;
}

std::vector<double> ExperimentResult::deltas(std::string_view metric) const {
    std::vector<double> out;
    for (const SeedResult& s : seeds) {
        if (s.ok) {
            out.push_back(metric == "heldout_bleu" ? s.delta_heldout_bleu() : s.delta_sentence_bleu());
        }
    }
    return out;
}

std::optional<Interval> ExperimentResult::delta_interval(std::string_view metric) const {
    const std::vector<double> d = deltas(metric);
    if (d.size() < 2) {
        return std::nullopt;
    }
    return confidence_interval(d);
}

std::vector<SummaryRow> summarize(const ExperimentConfig& config, std::span<const SeedResult> seeds) {
    std::vector<SummaryRow> rows;
    struct Metric {
        const char* name;
        double SeedResult::*reference;
        double SeedResult::*final;
    };
    const Metric metrics[] = {
        {"per_sentence_bleu", &SeedResult::reference_sentence_bleu, &SeedResult::final_sentence_bleu},
        {"heldout_bleu", &SeedResult::reference_heldout_bleu, &SeedResult::final_heldout_bleu},
    };
    // Seeds are listed in ascending order so that the file does not depend on
    // the order of the seeds list or on scheduling.
    std::vector<const SeedResult*> ordered;
    for (const SeedResult& s : seeds) {
        if (s.ok) {
            ordered.push_back(&s);
        }
    }
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->seed < b->seed; });
    for (const Metric& m : metrics) {
        std::vector<double> ref, fin, delta;
        for (const SeedResult* s : ordered) {
            ref.push_back(s->*m.reference);
            fin.push_back(s->*m.final);
            delta.push_back(delta_metric(s->*m.final, s->*m.reference));
            const std::string seed = std::to_string(s->seed);
            rows.push_back({config.experiment_id, config.preset, seed, m.name, "reference", ref.back(), {}, {}});
            rows.push_back({config.experiment_id, config.preset, seed, m.name, "final", fin.back(), {}, {}});
            rows.push_back({config.experiment_id, config.preset, seed, m.name, "delta", delta.back(), {}, {}});
        }
        const std::pair<const char*, const std::vector<double>*> groups[] = {
            {"reference", &ref}, {"final", &fin}, {"delta", &delta}};
        for (const auto& [phase, vals] : groups) {
            if (vals->empty()) {
                continue;
            }
            SummaryRow row{config.experiment_id, config.preset, "mean", m.name, phase, 0.0, {}, {}};
            if (vals->size() >= 2) {
                const Interval ci = confidence_interval(*vals);
                row.value = ci.mean;
                row.ci_low = ci.low();
                row.ci_high = ci.high();
            } else {
                row.value = vals->front();
            }
            rows.push_back(row);
        }
    }
    return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    ExperimentResult result;
    result.config = config;
    const Corpus corpus = build_corpus(config.task);
    const ReferenceModels ref = prepare_reference(config, corpus);

    result.seeds.resize(config.seeds.size());
    auto run_one = [&](std::size_t i) {
        const std::uint64_t seed = config.seeds[i];
        try {
            result.seeds[i] = run_seed(config, corpus, ref, seed);
        } catch (const std::exception& e) {
            SeedResult failed;
            failed.seed = seed;
            failed.error = e.what();
            RunRecord rec;
            rec.seed = seed;
            rec.phase = "failed";
            rec.note = e.what();
            failed.records.push_back(rec);
            result.seeds[i] = std::move(failed);
        }
    };
    const std::size_t jobs = std::min(config.jobs, config.seeds.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < config.seeds.size(); ++i) {
            run_one(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
                    run_one(i);
                }
            });
        }
        for (auto& t : workers) {
            t.join();
        }
    }
    result.summary = summarize(config, result.seeds);
    return result;
}

namespace {

std::string sweep_label(std::string_view parameter, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s=%g", std::string(parameter).c_str(), value);
    return buf;
}

void write_outputs(const ExperimentResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_config(r.config, dir / "config.json");
    write_summary_csv(r.summary, dir / "summary.csv");
    std::vector<RunRecord> records;
    for (const SeedResult& s : r.seeds) {
        records.insert(records.end(), s.records.begin(), s.records.end());
        if (!s.ok) {
            std::cerr << "seed " << s.seed << " failed: " << s.error << '\n';
        }
    }
    emit_report(records, ReportFormat::csv, dir / "records.csv");
    emit_report(records, ReportFormat::svg, dir / "online_reward.svg");
}

} // namespace

std::vector<ExperimentResult> run_and_report(const ExperimentConfig& config) {
    config.validate();
    const std::filesystem::path out(config.out_dir);
    if (!config.sweep) {
        ExperimentResult r = run_experiment(config);
        write_outputs(r, out);
        return {std::move(r)};
    }
    std::vector<ExperimentResult> results;
    std::vector<SummaryRow> combined;
    std::vector<SweepPoint> sentence_points;
    std::vector<SweepPoint> heldout_points;
    for (double v : config.sweep->values) {
        ExperimentConfig c = config;
        c.sweep.reset();
        const std::string label = sweep_label(config.sweep->parameter, v);
        c.experiment_id = config.experiment_id + "/" + label;
        c.rater = rater_for_sweep_value(config.rater, config.sweep->parameter, v);
        c.out_dir = (out / label).string();
        c.cache_dir = config.cache_path().string();
        ExperimentResult r = run_experiment(c);
        write_outputs(r, c.out_dir);
        combined.insert(combined.end(), r.summary.begin(), r.summary.end());
        if (auto ci = r.delta_interval("per_sentence_bleu")) {
            sentence_points.push_back({v, *ci});
        }
        if (auto ci = r.delta_interval("heldout_bleu")) {
            heldout_points.push_back({v, *ci});
        }
        results.push_back(std::move(r));
    }
    std::filesystem::create_directories(out);
    save_config(config, out / "config.json");
    write_summary_csv(combined, out / "summary.csv");
    write_sweep_svg(sentence_points, config.sweep->parameter, "per_sentence_bleu",
                    out / ("delta_vs_" + config.sweep->parameter + ".svg"));
    write_sweep_svg(heldout_points, config.sweep->parameter, "heldout_bleu",
                    out / ("heldout_delta_vs_" + config.sweep->parameter + ".svg"));
    return results;
}

} // namespace banditseq
