#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "blm/augment.hpp"
#include "blm/bpe.hpp"
#include "blm/checkpoint.hpp"
#include "blm/corpus.hpp"
#include "blm/evaluation.hpp"
#include "blm/experiment.hpp"
#include "blm/model.hpp"
#include "blm/training.hpp"

namespace fs = std::filesystem;
using namespace blm;

namespace {

bool verbose() {
    const char* v = std::getenv("BLM_LOG");
    return !v || std::string(v) != "quiet";
}

void log_info(const std::string& msg) {
    if (verbose()) std::cerr << "[blm] " << msg << "\n";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct PrepareArgs {
    std::string in_path, out_path, table_path;
    double valid_frac = 0.0;
    uint64_t seed = 0;
};

void run_prepare(const PrepareArgs& a) {
    std::vector<std::string> files;
    if (fs::is_directory(a.in_path)) {
        for (const auto& entry : fs::directory_iterator(a.in_path))
            if (entry.is_regular_file()) files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(a.in_path);
    }
    if (files.empty()) throw std::runtime_error("no input files under " + a.in_path);

    std::unique_ptr<corpus::Transliterator> translit;
    if (!a.table_path.empty())
        translit = std::make_unique<corpus::TableTransliterator>(
            corpus::TransliterationTable::load(a.table_path));

    corpus::Corpus out;
    out.source_tag = a.in_path;
    for (const auto& f : files) {
        std::vector<std::string> sentences = corpus::clean(read_file(f));
        if (translit)
            for (auto& s : sentences) s = translit->run(s).text;
        if (!sentences.empty())
            out.documents.push_back(corpus::Document{std::move(sentences)});
    }
    auto stats = out.stats();
    log_info("prepared " + std::to_string(stats.sentence_count) + " sentences, " +
             std::to_string(stats.word_count) + " words");

    std::vector<std::string> outputs;
    if (a.valid_frac > 0.0) {
        auto [train, valid] = corpus::split_corpus(out, a.valid_frac, a.seed);
        corpus::save_corpus(train, a.out_path);
        corpus::save_corpus(valid, a.out_path + ".valid");
        outputs = {a.out_path, a.out_path + ".valid"};
    } else {
        corpus::save_corpus(out, a.out_path);
        outputs = {a.out_path};
    }
    nlohmann::json cfg = {{"in", a.in_path},
                          {"transliterate", a.table_path},
                          {"valid_fraction", a.valid_frac},
                          {"seed", a.seed}};
    experiment::write_manifest(a.out_path + ".manifest.json", "prepare-corpus",
                               cfg.dump(), files, outputs);
}

struct TrainBpeArgs {
    std::string corpus_path, out_prefix;
    int64_t vocab_size = 8192;
    bool cased = false;
    uint64_t seed = 0;
};

void run_train_bpe(const TrainBpeArgs& a) {
    corpus::Corpus c = corpus::load_corpus(a.corpus_path);
    bpe::BpeModel model =
        bpe::train_bpe(c.all_sentences(), static_cast<size_t>(a.vocab_size),
                       bpe::default_special_tokens(), !a.cased);
    std::string vocab_path = a.out_prefix + ".vocab.txt";
    std::string merges_path = a.out_prefix + ".merges.txt";
    model.save(vocab_path, merges_path);
    log_info("trained BPE with " + std::to_string(model.vocab().size()) +
             " tokens, " + std::to_string(model.merges().size()) + " merges");
    nlohmann::json cfg = {{"corpus", a.corpus_path},
                          {"vocab_size", a.vocab_size},
                          {"cased", a.cased},
                          {"seed", a.seed}};
    experiment::write_manifest(a.out_prefix + ".manifest.json", "train-bpe",
                               cfg.dump(), {a.corpus_path},
                               {vocab_path, merges_path});
}

struct AugmentArgs {
    std::string base_path, new_path, out_path, map_path;
    uint64_t seed = 0;
};

void run_augment(const AugmentArgs& a) {
    bpe::Vocabulary vy = bpe::Vocabulary::load(a.base_path);
    bpe::Vocabulary vx = bpe::Vocabulary::load(a.new_path);
    augment::AugmentationReport rep = augment::check_preconditions(vx, vy);
    log_info("overlap ratio " + std::to_string(rep.overlap_ratio) +
             ", shared " + std::to_string(rep.shared_count));
    auto [vz, map] = augment::augment(vy, vx);
    vz.save(a.out_path);
    map.save_tsv(a.map_path);
    log_info("augmented vocabulary: " + std::to_string(vz.size()) + " tokens (" +
             std::to_string(map.shared_count) + " shared, " +
             std::to_string(map.x_only_count) + " new, " +
             std::to_string(map.y_only_count) + " retained)");
    nlohmann::json cfg = {{"base", a.base_path},
                          {"new", a.new_path},
                          {"seed", a.seed},
                          {"overlap_ratio", rep.overlap_ratio},
                          {"precondition_eq1", rep.precondition_eq1},
                          {"precondition_eq2", rep.precondition_eq2}};
    experiment::write_manifest(a.out_path + ".manifest.json", "augment-vocab",
                               cfg.dump(), {a.base_path, a.new_path},
                               {a.out_path, a.map_path});
}

struct PretrainArgs {
    std::string regime = "from-scratch";
    std::string corpus_path, valid_path, vocab_path, merges_path;
    std::string base_path, map_path, out_path, metrics_path;
    int64_t steps = 100;
    double lr = 1e-4;
    int batch_size = 16;
    int seq_len = 64;
    double mask_rate = 0.15;
    std::string objective = "mlm+nsp";
    uint64_t seed = 0;
    int64_t eval_every = 50;
    bool cased = false;
    int layers = 2, hidden = 64, heads = 2, max_seq_len = 64, ffn_multiplier = 4;
    double dropout = 0.1;
};

void run_pretrain(const PretrainArgs& a) {
    training::TrainingConfig cfg;
    cfg.regime = training::regime_from_string(a.regime);
    cfg.steps = a.steps;
    cfg.lr = a.lr;
    cfg.batch_size = a.batch_size;
    cfg.seq_len = a.seq_len;
    cfg.mask_rate = a.mask_rate;
    cfg.objective = model::objective_from_string(a.objective);
    cfg.seed = a.seed;
    cfg.eval_every = a.eval_every;
    cfg.validate();

    if (cfg.regime != training::Regime::FromScratch && a.base_path.empty())
        throw std::runtime_error(a.regime +
                                 " regime requires a base checkpoint (--base)");
    if (cfg.regime == training::Regime::FromScratch && !a.base_path.empty())
        throw std::runtime_error("from-scratch regime forbids --base");
    if (cfg.regime == training::Regime::ContinuedBilingual && a.map_path.empty())
        throw std::runtime_error("bilingual regime requires --map");

    corpus::Corpus train = corpus::load_corpus(a.corpus_path);
    corpus::Corpus valid;
    bpe::BpeModel tok =
        bpe::BpeModel::load(a.vocab_path, a.merges_path, !a.cased);

    model::ModelConfig arch;
    arch.layers = a.layers;
    arch.hidden = a.hidden;
    arch.heads = a.heads;
    arch.max_seq_len = a.max_seq_len;
    arch.ffn_multiplier = a.ffn_multiplier;
    arch.dropout_rate = a.dropout;
    arch.vocab_size = static_cast<int>(tok.vocab().size());

    std::optional<model::Checkpoint> base;
    if (!a.base_path.empty()) base = model::load_checkpoint(a.base_path);
    std::optional<augment::AugmentationMap> map;
    if (!a.map_path.empty()) map = augment::AugmentationMap::load_tsv(a.map_path);

    training::PretrainData data{&train, nullptr, &tok};
    if (!a.valid_path.empty()) {
        valid = corpus::load_corpus(a.valid_path);
        data.valid = &valid;
    }

    training::PretrainResult result = training::run_pretraining(
        data, cfg, arch, base ? &*base : nullptr, map ? &*map : nullptr);
    model::save_checkpoint(a.out_path, result.params, result.config);
    std::string metrics_path =
        a.metrics_path.empty() ? a.out_path + ".metrics.jsonl" : a.metrics_path;
    result.log.save(metrics_path);
    log_info("final train loss " +
             std::to_string(result.log.steps.back().loss));

    nlohmann::json cfgj = {{"regime", a.regime},       {"steps", a.steps},
                           {"lr", a.lr},               {"batch_size", a.batch_size},
                           {"seq_len", a.seq_len},     {"mask_rate", a.mask_rate},
                           {"objective", a.objective}, {"seed", a.seed},
                           {"eval_every", a.eval_every}};
    std::vector<std::string> inputs = {a.corpus_path, a.vocab_path, a.merges_path};
    if (!a.base_path.empty()) inputs.push_back(a.base_path);
    if (!a.map_path.empty()) inputs.push_back(a.map_path);
    if (!a.valid_path.empty()) inputs.push_back(a.valid_path);
    experiment::write_manifest(a.out_path + ".manifest.json", "pretrain",
                               cfgj.dump(), inputs, {a.out_path, metrics_path});
}

struct EvaluateArgs {
    std::string ckpt_path, corpus_path, vocab_path, merges_path, out_path;
    std::string objective = "mlm+nsp";
    int batch_size = 16;
    int seq_len = 64;
    double mask_rate = 0.15;
    uint64_t seed = 0;
    bool cased = false;
};

void run_evaluate(const EvaluateArgs& a) {
    model::Checkpoint ckpt = model::load_checkpoint(a.ckpt_path);
    bpe::BpeModel tok = bpe::BpeModel::load(a.vocab_path, a.merges_path, !a.cased);
    if (static_cast<int>(tok.vocab().size()) != ckpt.config.vocab_size)
        throw std::runtime_error("vocab/checkpoint mismatch: tokenizer has " +
                                 std::to_string(tok.vocab().size()) +
                                 " tokens, checkpoint expects " +
                                 std::to_string(ckpt.config.vocab_size));
    corpus::Corpus c = corpus::load_corpus(a.corpus_path);
    model::Objective obj = model::objective_from_string(a.objective);

    std::mt19937_64 rng(a.seed);
    auto pairs = training::make_sentence_pairs(c, obj, a.seed);
    std::vector<model::MaskedBatch> batches;
    for (size_t i = 0; i < pairs.size(); i += a.batch_size) {
        std::vector<training::SentencePair> slice(
            pairs.begin() + i,
            pairs.begin() + std::min(pairs.size(), i + a.batch_size));
        batches.push_back(training::prepare_mlm_batch(
            slice, tok, a.seq_len, a.mask_rate, model::has_pair_task(obj), rng));
    }
    evaluation::EvalReport rep =
        evaluation::evaluate(ckpt.params, ckpt.config, batches, obj);
    std::ofstream out(a.out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + a.out_path);
    out << rep.to_json() << '\n';
    out.close();
    std::cout << rep.to_json() << "\n";
    nlohmann::json cfgj = {{"objective", a.objective},
                           {"batch_size", a.batch_size},
                           {"seq_len", a.seq_len},
                           {"mask_rate", a.mask_rate},
                           {"seed", a.seed}};
    experiment::write_manifest(
        a.out_path + ".manifest.json", "evaluate", cfgj.dump(),
        {a.ckpt_path, a.corpus_path, a.vocab_path, a.merges_path}, {a.out_path});
}

struct CompareArgs {
    std::vector<std::string> reports;  // name=path
    std::string out_path;
    uint64_t seed = 0;
};

void run_compare(const CompareArgs& a) {
    std::map<std::string, evaluation::EvalReport> reports;
    std::vector<std::string> inputs;
    for (const auto& spec : a.reports) {
        size_t eq = spec.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("expected name=path, got: " + spec);
        std::string name = spec.substr(0, eq);
        std::string path = spec.substr(eq + 1);
        reports[name] = evaluation::EvalReport::from_json(read_file(path));
        inputs.push_back(path);
    }
    evaluation::ComparisonTable table = evaluation::compare_regimes(reports);
    std::cout << table.render_text();
    std::vector<std::string> outputs;
    if (!a.out_path.empty()) {
        std::ofstream t(a.out_path + ".txt", std::ios::binary);
        t << table.render_text();
        std::ofstream j(a.out_path + ".json", std::ios::binary);
        j << table.to_json() << '\n';
        outputs = {a.out_path + ".txt", a.out_path + ".json"};
        nlohmann::json cfgj = {{"reports", a.reports}, {"seed", a.seed}};
        experiment::write_manifest(a.out_path + ".manifest.json", "compare",
                                   cfgj.dump(), inputs, outputs);
    }
}

struct ReproduceArgs {
    std::string config_path, out_dir = "runs/experiment";
};

void run_reproduce(const ReproduceArgs& a) {
    experiment::ExperimentConfig config =
        a.config_path.empty()
            ? experiment::ExperimentConfig{}
            : experiment::ExperimentConfig::from_json_file(a.config_path);
    experiment::ExperimentResult result =
        experiment::reproduce_experiment(config, a.out_dir);
    std::cout << result.comparison.render_text();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bilingual language modeling via position-preserving "
                 "vocabulary augmentation"};
    app.require_subcommand(1);

    PrepareArgs prep;
    auto* prepare = app.add_subcommand(
        "prepare-corpus", "Clean raw text into a sentence-per-line corpus");
    prepare->add_option("--in", prep.in_path, "Input file or directory")->required();
    prepare->add_option("--out", prep.out_path, "Output corpus path")->required();
    prepare->add_option("--transliterate", prep.table_path,
                        "Transliteration table (TSV)");
    prepare->add_option("--valid-frac", prep.valid_frac,
                        "Held-out fraction (writes <out>.valid)");
    prepare->add_option("--seed", prep.seed, "Split seed");

    TrainBpeArgs tb;
    auto* train_bpe_cmd =
        app.add_subcommand("train-bpe", "Train a byte-level BPE tokenizer");
    train_bpe_cmd->add_option("--corpus", tb.corpus_path, "Corpus file")->required();
    train_bpe_cmd->add_option("--vocab-size", tb.vocab_size, "Vocabulary size")
        ->required();
    train_bpe_cmd->add_option("--out", tb.out_prefix, "Output prefix")->required();
    train_bpe_cmd->add_flag("--cased", tb.cased, "Keep case (default uncased)");
    train_bpe_cmd->add_option("--seed", tb.seed, "Unused; accepted for uniformity");

    AugmentArgs aug;
    auto* augment_cmd = app.add_subcommand(
        "augment-vocab", "Merge a new vocabulary into a base vocabulary, "
                         "preserving shared-token ids");
    augment_cmd->add_option("--base", aug.base_path, "Base vocabulary V(y)")
        ->required();
    augment_cmd->add_option("--new", aug.new_path, "New vocabulary V(x)")
        ->required();
    augment_cmd->add_option("--out", aug.out_path, "Augmented vocabulary V(z)")
        ->required();
    augment_cmd->add_option("--map", aug.map_path, "Augmentation map TSV")
        ->required();
    augment_cmd->add_option("--seed", aug.seed, "Unused; accepted for uniformity");

    PretrainArgs pt;
    auto* pretrain_cmd =
        app.add_subcommand("pretrain", "Run a pretraining regime");
    pretrain_cmd->add_option("--regime", pt.regime,
                             "from-scratch|bilingual|multilingual");
    pretrain_cmd->add_option("--corpus", pt.corpus_path, "Training corpus")
        ->required();
    pretrain_cmd->add_option("--valid", pt.valid_path, "Validation corpus");
    pretrain_cmd->add_option("--vocab", pt.vocab_path, "Vocabulary file")
        ->required();
    pretrain_cmd->add_option("--merges", pt.merges_path, "Merges file")->required();
    pretrain_cmd->add_option("--base", pt.base_path, "Base checkpoint");
    pretrain_cmd->add_option("--map", pt.map_path, "Augmentation map TSV");
    pretrain_cmd->add_option("--out", pt.out_path, "Output checkpoint")->required();
    pretrain_cmd->add_option("--metrics", pt.metrics_path, "Metrics log path");
    pretrain_cmd->add_option("--steps", pt.steps, "Optimizer steps");
    pretrain_cmd->add_option("--lr", pt.lr, "Learning rate");
    pretrain_cmd->add_option("--batch-size", pt.batch_size, "Batch size");
    pretrain_cmd->add_option("--seq-len", pt.seq_len, "Sequence length");
    pretrain_cmd->add_option("--mask-rate", pt.mask_rate, "Mask rate");
    pretrain_cmd->add_option("--objective", pt.objective, "mlm|mlm+nsp|mlm+sop");
    pretrain_cmd->add_option("--seed", pt.seed, "Seed");
    pretrain_cmd->add_option("--eval-every", pt.eval_every, "Eval interval");
    pretrain_cmd->add_flag("--cased", pt.cased, "Cased tokenizer");
    pretrain_cmd->add_option("--layers", pt.layers, "Encoder layers");
    pretrain_cmd->add_option("--hidden", pt.hidden, "Hidden size");
    pretrain_cmd->add_option("--heads", pt.heads, "Attention heads");
    pretrain_cmd->add_option("--max-seq-len", pt.max_seq_len, "Max sequence length");
    pretrain_cmd->add_option("--ffn-multiplier", pt.ffn_multiplier, "FFN multiplier");
    pretrain_cmd->add_option("--dropout", pt.dropout, "Dropout rate");

    EvaluateArgs ev;
    auto* evaluate_cmd =
        app.add_subcommand("evaluate", "Score a checkpoint on a corpus");
    evaluate_cmd->add_option("--ckpt", ev.ckpt_path, "Checkpoint")->required();
    evaluate_cmd->add_option("--corpus", ev.corpus_path, "Eval corpus")->required();
    evaluate_cmd->add_option("--vocab", ev.vocab_path, "Vocabulary file")
        ->required();
    evaluate_cmd->add_option("--merges", ev.merges_path, "Merges file")->required();
    evaluate_cmd->add_option("--out", ev.out_path, "Report JSON path")->required();
    evaluate_cmd->add_option("--objective", ev.objective, "mlm|mlm+nsp|mlm+sop");
    evaluate_cmd->add_option("--batch-size", ev.batch_size, "Batch size");
    evaluate_cmd->add_option("--seq-len", ev.seq_len, "Sequence length");
    evaluate_cmd->add_option("--mask-rate", ev.mask_rate, "Mask rate");
    evaluate_cmd->add_option("--seed", ev.seed, "Masking seed");
    evaluate_cmd->add_flag("--cased", ev.cased, "Cased tokenizer");

    CompareArgs cmp;
    auto* compare_cmd =
        app.add_subcommand("compare", "Compare evaluation reports");
    compare_cmd->add_option("--report", cmp.reports, "name=report.json")
        ->required()
        ->expected(-2);
    compare_cmd->add_option("--out", cmp.out_path, "Output prefix (.txt/.json)");
    compare_cmd->add_option("--seed", cmp.seed, "Unused; accepted for uniformity");

    ReproduceArgs rep;
    auto* reproduce_cmd = app.add_subcommand(
        "reproduce", "Run the three-regime comparison experiment");
    reproduce_cmd->add_option("--config", rep.config_path, "Experiment config JSON");
    reproduce_cmd->add_option("--out", rep.out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (prepare->parsed()) run_prepare(prep);
        if (train_bpe_cmd->parsed()) run_train_bpe(tb);
        if (augment_cmd->parsed()) run_augment(aug);
        if (pretrain_cmd->parsed()) run_pretrain(pt);
        if (evaluate_cmd->parsed()) run_evaluate(ev);
        if (compare_cmd->parsed()) run_compare(cmp);
        if (reproduce_cmd->parsed()) run_reproduce(rep);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
