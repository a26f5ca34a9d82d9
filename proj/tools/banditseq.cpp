// banditseq command-line driver. Exit codes: 0 success, 1 configuration
// error, 2 runtime failure.
#include "banditseq/bleu.hpp"
#include "banditseq/errors.hpp"
#include "banditseq/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace bs = banditseq;

namespace {

struct Common {
    std::string config_path;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config_path, "experiment config (JSON)");
    app->add_option("--preset", c.preset, "named preset used when --config is absent");
    app->add_option("--seed", c.seed, "run a single seed instead of the config's list");
    app->add_option("--out-dir", c.out_dir, "output directory override");
}

bs::ExperimentConfig resolve(const Common& c) {
    bs::ExperimentConfig config;
    if (!c.config_path.empty()) {
        config = bs::load_config(c.config_path);
    } else if (!c.preset.empty()) {
        config = bs::make_preset(c.preset);
    }
    if (c.seed) {
        config.seeds = {*c.seed};
    }
    if (!c.out_dir.empty()) {
        // A preset's default cache sits next to its runs; keep it with the
        // overridden output unless the config names one explicitly.
        if (c.config_path.empty()) {
            config.cache_dir.clear();
        }
        config.out_dir = c.out_dir;
    }
    config.validate();
    return config;
}

int cmd_gen_data(const Common& c) {
    const bs::ExperimentConfig config = resolve(c);
    if (config.task.kind != "cipher") {
        throw bs::ConfigError("gen-data needs a cipher task");
    }
    const bs::CipherCorpus cc = bs::gen_cipher_corpus(config.task.cipher);
    const std::filesystem::path dir = std::filesystem::path(config.out_dir) / "data";
    std::filesystem::create_directories(dir);
    bs::save_cipher_corpus(cc, dir / "cipher");
    const auto counts = cc.corpus.split_counts();
    std::printf("wrote %zu pairs to %s (supervised %zu, bandit %zu, dev %zu, test %zu)\n",
                cc.corpus.pairs.size(), (dir / "cipher").string().c_str(), counts[0], counts[1], counts[2],
                counts[3]);
    return 0;
}

int cmd_pretrain(const Common& c) {
    const bs::ExperimentConfig config = resolve(c);
    const bs::Corpus corpus = bs::build_corpus(config.task);
    const bs::ReferenceModels ref = bs::prepare_reference(config, corpus);
    if (ref.from_cache) {
        std::printf("reference models loaded from %s\n", config.cache_path().string().c_str());
    }
    for (const bs::EpochLog& e : ref.pretrain_log) {
        std::printf("pretrain epoch %zu loss %.4f dev_ppl %.4f lr %.2e\n", e.epoch, e.train_loss,
                    e.dev_perplexity, e.learning_rate);
    }
    for (std::size_t i = 0; i < ref.critic_log.size(); ++i) {
        std::printf("critic epoch %zu sq_error %.4f\n", i + 1, ref.critic_log[i]);
    }
    const auto test = corpus.split(bs::Split::test);
    const auto dev = corpus.split(bs::Split::dev);
    std::printf("dev per_sentence_bleu %.4f test heldout_bleu %.4f\n",
                bs::per_sentence_bleu_metric(ref.nmt, dev, bs::Rng(config.pretrain.seed).fork("dev-eval")),
                bs::heldout_bleu_metric(ref.nmt, test));
    return 0;
}

int cmd_bandit_train(const Common& c) {
    const bs::ExperimentConfig config = resolve(c);
    const auto results = bs::run_and_report(config);
    int failures = 0;
    for (const bs::ExperimentResult& r : results) {
        for (const bs::SeedResult& s : r.seeds) {
            failures += s.ok ? 0 : 1;
        }
        const auto d = r.deltas("per_sentence_bleu");
        const auto h = r.deltas("heldout_bleu");
        std::printf("%s", r.config.experiment_id.c_str());
        if (auto ci = r.delta_interval("per_sentence_bleu")) {
            std::printf("  dPerSentenceBLEU %+.4f [%+.4f, %+.4f]", ci->mean, ci->low(), ci->high());
        } else if (!d.empty()) {
            std::printf("  dPerSentenceBLEU %+.4f", d.front());
        }
        if (auto ci = r.delta_interval("heldout_bleu")) {
            std::printf("  dHeldoutBLEU %+.4f [%+.4f, %+.4f]", ci->mean, ci->low(), ci->high());
        } else if (!h.empty()) {
            std::printf("  dHeldoutBLEU %+.4f", h.front());
        }
        std::printf("\n");
    }
    std::printf("summary written to %s\n", (std::filesystem::path(config.out_dir) / "summary.csv").string().c_str());
    return failures == 0 ? 0 : 2;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint) {
    const bs::ExperimentConfig config = resolve(c);
    const bs::Corpus corpus = bs::build_corpus(config.task);
    bs::Seq2SeqConfig mc;
    mc.src_vocab_size = corpus.source_vocab.size();
    mc.tgt_vocab_size = corpus.target_vocab.size();
    mc.embed_dim = config.model.embed_dim;
    mc.hidden_dim = config.model.hidden_dim;
    const bs::Seq2SeqModel model = checkpoint.empty()
                                       ? bs::prepare_reference(config, corpus).nmt
                                       : bs::Seq2SeqModel(mc, bs::ParamStore::load_file(checkpoint));
    const auto test = corpus.split(bs::Split::test);
    const auto dev = corpus.split(bs::Split::dev);
    std::printf("split,metric,value\n");
    std::printf("dev,perplexity,%.6f\n", bs::dev_perplexity(model, dev));
    std::printf("test,heldout_bleu,%.6f\n", bs::heldout_bleu_metric(model, test));
    std::printf("test,per_sentence_bleu,%.6f\n",
                bs::per_sentence_bleu_metric(model, test, bs::Rng(config.seeds.front()).fork("evaluate")));
    return 0;
}

std::vector<std::vector<std::string>> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw bs::IoError("cannot read " + path);
    }
    std::vector<std::vector<std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<std::string> words;
        std::string w;
        while (ls >> w) {
            words.push_back(w);
        }
        out.push_back(std::move(words));
    }
    return out;
}

int cmd_rate(const std::string& hyp_path, const std::string& ref_path) {
    const auto hyp_words = read_lines(hyp_path);
    const auto ref_words = read_lines(ref_path);
    if (hyp_words.size() != ref_words.size()) {
        throw bs::ContractViolation("line count mismatch: " + std::to_string(hyp_words.size()) +
                                    " hypotheses vs " + std::to_string(ref_words.size()) + " references");
    }
    // Token identity is all BLEU needs, so one shared vocabulary suffices.
    std::vector<std::vector<std::string>> all = hyp_words;
    all.insert(all.end(), ref_words.begin(), ref_words.end());
    const bs::Vocab vocab = bs::Vocab::build(all, all.size() * 64 + 1024);
    std::vector<bs::TokenSeq> hyps, refs;
    std::printf("line,sentence_bleu\n");
    for (std::size_t i = 0; i < hyp_words.size(); ++i) {
        hyps.push_back(vocab.encode(hyp_words[i]));
        refs.push_back(vocab.encode(ref_words[i]));
        if (refs.back().empty()) {
            std::printf("%zu,\n", i + 1);
            continue;
        }
        std::printf("%zu,%.6f\n", i + 1, bs::sentence_bleu(hyps.back(), refs.back()).score);
    }
    std::printf("corpus,%.6f\n", bs::corpus_bleu(hyps, refs));
    return 0;
}

int cmd_report(const std::string& records_path, const std::string& out_path) {
    const auto records = bs::read_records_csv(records_path);
    bs::emit_report(records, bs::ReportFormat::svg, out_path);
    std::printf("wrote %s (%zu records)\n", out_path.c_str(), records.size());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bandit structured prediction for sequence-to-sequence models"};
    app.require_subcommand(1);

    Common common;
    auto* gen = app.add_subcommand("gen-data", "generate the synthetic cipher corpus");
    add_common(gen, common);
    auto* pre = app.add_subcommand("pretrain", "pretrain (or load) the reference model and critic");
    add_common(pre, common);
    auto* train = app.add_subcommand("bandit-train", "run the bandit experiment over all seeds");
    add_common(train, common);
    auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint on dev and test");
    add_common(eval, common);
    std::string checkpoint;
    eval->add_option("--checkpoint", checkpoint, "model checkpoint (default: cached reference)");
    auto* rate = app.add_subcommand("rate", "sentence and corpus BLEU of a hypothesis file");
    std::string hyp_path, ref_path;
    rate->add_option("--hyp", hyp_path, "hypotheses, one tokenized sentence per line")->required();
    rate->add_option("--ref", ref_path, "references, line-aligned")->required();
    auto* report = app.add_subcommand("report", "render records.csv as an SVG chart");
    std::string records_path, svg_path = "online_reward.svg";
    report->add_option("--records", records_path, "records.csv from bandit-train")->required();
    report->add_option("--output", svg_path, "SVG output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*gen) {
            return cmd_gen_data(common);
        }
        if (*pre) {
            return cmd_pretrain(common);
        }
        if (*train) {
            return cmd_bandit_train(common);
        }
        if (*eval) {
            return cmd_evaluate(common, checkpoint);
        }
        if (*rate) {
            return cmd_rate(hyp_path, ref_path);
        }
        if (*report) {
            return cmd_report(records_path, svg_path);
        }
    } catch (const bs::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
