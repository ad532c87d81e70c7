#include "blm/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "blm/augment.hpp"
#include "blm/checkpoint.hpp"
#include "blm/corpus.hpp"
#include "blm/text.hpp"

namespace fs = std::filesystem;

namespace blm::experiment {

namespace {

constexpr const char* kToolVersion = "blm 0.1.0";

nlohmann::json arch_to_json(const model::ModelConfig& c) {
    return {{"layers", c.layers},         {"hidden", c.hidden},
            {"heads", c.heads},           {"max_seq_len", c.max_seq_len},
            {"vocab_size", c.vocab_size}, {"ffn_multiplier", c.ffn_multiplier},
            {"dropout_rate", c.dropout_rate}};
}

model::ModelConfig arch_from_json(const nlohmann::json& j) {
    model::ModelConfig c;
    c.layers = j.value("layers", 2);
    c.hidden = j.value("hidden", 64);
    c.heads = j.value("heads", 2);
    c.max_seq_len = j.value("max_seq_len", 64);
    c.vocab_size = j.value("vocab_size", 512);
    c.ffn_multiplier = j.value("ffn_multiplier", 4);
    c.dropout_rate = j.value("dropout_rate", 0.1);
    return c;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    ExperimentConfig c;
    c.shared_fraction = j.value("shared_fraction", c.shared_fraction);
    c.sentences = j.value("sentences", c.sentences);
    c.corpus_seed = j.value("corpus_seed", c.corpus_seed);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.steps = j.value("steps", c.steps);
    c.base_steps = j.value("base_steps", c.base_steps);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    c.lr_scratch = j.value("lr_scratch", c.lr_scratch);
    c.lr_continued = j.value("lr_continued", c.lr_continued);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seq_len = j.value("seq_len", c.seq_len);
    c.mask_rate = j.value("mask_rate", c.mask_rate);
    if (j.contains("objective"))
        c.objective = model::objective_from_string(j.at("objective"));
    c.eval_every = j.value("eval_every", c.eval_every);
    c.valid_fraction = j.value("valid_fraction", c.valid_fraction);
    c.distractor_languages = j.value("distractor_languages", c.distractor_languages);
    if (j.contains("model")) c.arch = arch_from_json(j.at("model"));
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string ExperimentConfig::to_json() const {
    nlohmann::json j = {{"shared_fraction", shared_fraction},
                        {"sentences", sentences},
                        {"corpus_seed", corpus_seed},
                        {"vocab_size", vocab_size},
                        {"steps", steps},
                        {"base_steps", base_steps},
                        {"seeds", seeds},
                        {"lr_scratch", lr_scratch},
                        {"lr_continued", lr_continued},
                        {"batch_size", batch_size},
                        {"seq_len", seq_len},
                        {"mask_rate", mask_rate},
                        {"objective", model::to_string(objective)},
                        {"eval_every", eval_every},
                        {"valid_fraction", valid_fraction},
                        {"distractor_languages", distractor_languages},
                        {"model", arch_to_json(arch)}};
    return j.dump(2);
}

void ExperimentConfig::validate() const {
    if (steps < 1) throw std::runtime_error("experiment: steps must be >= 1");
    if (base_steps < 1)
        throw std::runtime_error("experiment: base_steps must be >= 1");
    if (seeds.empty()) throw std::runtime_error("experiment: need at least one seed");
    if (!(shared_fraction >= 0.0 && shared_fraction <= 1.0))
        throw std::runtime_error("experiment: shared_fraction must be in [0,1]");
    if (distractor_languages < 2)
        throw std::runtime_error("experiment: need >= 2 distractor languages");
    arch.validate();
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return text::fnv1a64_hex(ss.str());
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::string& config_json,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = nlohmann::json::parse(config_json);
    j["tool_version"] = kToolVersion;
    auto now = std::chrono::system_clock::now();
    j["timestamp_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch())
            .count();
    for (const auto& p : inputs)
        j["inputs"].push_back({{"path", p}, {"digest", file_digest(p)}});
    for (const auto& p : outputs)
        j["outputs"].push_back({{"path", p}, {"digest", file_digest(p)}});
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
}

evaluation::EvalReport median_report(
    const std::vector<evaluation::EvalReport>& reports) {
    if (reports.empty()) throw std::runtime_error("no reports");
    auto median_of = [&](auto getter) {
        std::vector<double> v;
        for (const auto& r : reports) v.push_back(getter(r));
        std::sort(v.begin(), v.end());
        size_t n = v.size();
        return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    evaluation::EvalReport m;
    m.mlm_accuracy =
        median_of([](const auto& r) { return r.mlm_accuracy; });
    m.mlm_loss_nats =
        median_of([](const auto& r) { return r.mlm_loss_nats; });
    m.perplexity = median_of([](const auto& r) { return r.perplexity; });
    if (reports.front().pair_accuracy)
        m.pair_accuracy =
            median_of([](const auto& r) { return r.pair_accuracy.value_or(0.0); });
    m.masked_token_count = reports.front().masked_token_count;
    m.pair_count = reports.front().pair_count;
    return m;
}

ExperimentResult reproduce_experiment(const ExperimentConfig& config,
                                      const std::string& out_dir) {
    config.validate();
    fs::create_directories(out_dir);
    auto path = [&](const std::string& name) {
        return (fs::path(out_dir) / name).string();
    };

    // Corpora (shared across seeds; the regimes get matched data).
    auto [hi, lo] = training::synth_bilingual_corpus(
        config.shared_fraction, config.sentences, config.corpus_seed);
    auto [lo_train, lo_valid] =
        corpus::split_corpus(lo, config.valid_fraction, config.corpus_seed);
    corpus::Corpus mixture;
    mixture.source_tag = "synth:mixture";
    {
        int languages = 1 + config.distractor_languages;
        int64_t per_language = config.sentences / languages;
        auto [hi_part, unused] = training::synth_bilingual_corpus(
            config.shared_fraction, per_language, config.corpus_seed);
        (void)unused;
        mixture.documents = hi_part.documents;
        for (int d = 0; d < config.distractor_languages; ++d) {
            corpus::Corpus extra = training::synth_distractor_corpus(
                2 + d, per_language, config.corpus_seed);
            mixture.documents.insert(mixture.documents.end(),
                                     extra.documents.begin(),
                                     extra.documents.end());
        }
    }
    corpus::save_corpus(hi, path("corpus_hi.txt"));
    corpus::save_corpus(lo_train, path("corpus_lo_train.txt"));
    corpus::save_corpus(lo_valid, path("corpus_lo_valid.txt"));
    corpus::save_corpus(mixture, path("corpus_mixture.txt"));

    // Tokenizers.
    bpe::BpeModel bpe_hi =
        bpe::train_bpe(hi.all_sentences(), config.vocab_size);
    bpe::BpeModel bpe_lo =
        bpe::train_bpe(lo_train.all_sentences(), config.vocab_size);
    bpe::BpeModel bpe_multi =
        bpe::train_bpe(mixture.all_sentences(), config.vocab_size);
    bpe_hi.save(path("vocab_hi.txt"), path("merges_hi.txt"));
    bpe_lo.save(path("vocab_lo.txt"), path("merges_lo.txt"));
    bpe_multi.save(path("vocab_multi.txt"), path("merges_multi.txt"));

    // Augmentations (fail fast if the overlap precondition does not hold).
    auto [vz_bi, map_bi] = augment::augment(bpe_hi.vocab(), bpe_lo.vocab());
    auto [vz_multi, map_multi] =
        augment::augment(bpe_multi.vocab(), bpe_lo.vocab());
    map_bi.save_tsv(path("map_bilingual.tsv"));
    map_multi.save_tsv(path("map_multilingual.tsv"));
    bpe::BpeModel bpe_lo_bi = bpe_lo.with_vocab(vz_bi);
    bpe::BpeModel bpe_lo_multi = bpe_lo.with_vocab(vz_multi);

    ExperimentResult result;
    auto record = [&](const std::string& regime, uint64_t seed,
                      const training::PretrainResult& run) {
        std::string log_path =
            path(regime + "_seed" + std::to_string(seed) + ".metrics.jsonl");
        run.log.save(log_path);
        result.metrics_log_paths.push_back(log_path);
        if (run.log.evals.empty())
            throw std::runtime_error("run produced no eval snapshot");
        result.regimes[regime].per_seed.push_back(run.log.evals.back().report);
    };

    for (uint64_t seed : config.seeds) {
        // Base models (one per seed so the medians see seed variation).
        training::TrainingConfig base_cfg;
        base_cfg.regime = training::Regime::FromScratch;
        base_cfg.steps = config.base_steps;
        base_cfg.lr = config.lr_scratch;
        base_cfg.batch_size = config.batch_size;
        base_cfg.seq_len = config.seq_len;
        base_cfg.mask_rate = config.mask_rate;
        base_cfg.objective = config.objective;
        base_cfg.seed = seed;
        base_cfg.eval_every = config.base_steps;  // final snapshot only

        training::PretrainData hi_data{&hi, nullptr, &bpe_hi};
        auto base_bi_run =
            training::run_pretraining(hi_data, base_cfg, config.arch);
        model::Checkpoint base_bi{base_bi_run.config, base_bi_run.params};

        training::PretrainData multi_data{&mixture, nullptr, &bpe_multi};
        auto base_multi_run =
            training::run_pretraining(multi_data, base_cfg, config.arch);
        model::Checkpoint base_multi{base_multi_run.config, base_multi_run.params};

        // Matched-budget regimes on the low-resource corpus.
        training::TrainingConfig cfg;
        cfg.steps = config.steps;
        cfg.batch_size = config.batch_size;
        cfg.seq_len = config.seq_len;
        cfg.mask_rate = config.mask_rate;
        cfg.objective = config.objective;
        cfg.seed = seed;
        cfg.eval_every = config.eval_every;

        cfg.regime = training::Regime::FromScratch;
        cfg.lr = config.lr_scratch;
        training::PretrainData scratch_data{&lo_train, &lo_valid, &bpe_lo};
        record("from-scratch", seed,
               training::run_pretraining(scratch_data, cfg, config.arch));

        cfg.regime = training::Regime::ContinuedBilingual;
        cfg.lr = config.lr_continued;
        training::PretrainData bi_data{&lo_train, &lo_valid, &bpe_lo_bi};
        record("bilingual", seed,
               training::run_pretraining(bi_data, cfg, config.arch, &base_bi,
                                         &map_bi));

        cfg.regime = training::Regime::ContinuedMultilingual;
        training::PretrainData mu_data{&lo_train, &lo_valid, &bpe_lo_multi};
        record("multilingual", seed,
               training::run_pretraining(mu_data, cfg, config.arch, &base_multi,
                                         &map_multi));
    }

    std::map<std::string, evaluation::EvalReport> medians;
    for (auto& [name, outcome] : result.regimes) {
        outcome.median = median_report(outcome.per_seed);
        medians[name] = outcome.median;
    }
    result.comparison = evaluation::compare_regimes(medians);

    {
        std::ofstream out(path("comparison.txt"), std::ios::binary);
        out << result.comparison.render_text();
    }
    {
        std::ofstream out(path("comparison.json"), std::ios::binary);
        out << result.comparison.to_json() << '\n';
    }
    {
        nlohmann::json j;
        for (const auto& [name, outcome] : result.regimes) {
            for (const auto& rep : outcome.per_seed)
                j[name]["per_seed"].push_back(
                    nlohmann::json::parse(rep.to_json()));
            j[name]["median"] = nlohmann::json::parse(outcome.median.to_json());
        }
        std::ofstream out(path("reports.json"), std::ios::binary);
        out << j.dump(2) << '\n';
    }

    std::vector<std::string> outputs = {
        path("corpus_hi.txt"),      path("corpus_lo_train.txt"),
        path("corpus_lo_valid.txt"), path("corpus_mixture.txt"),
        path("vocab_hi.txt"),       path("vocab_lo.txt"),
        path("vocab_multi.txt"),    path("map_bilingual.tsv"),
        path("map_multilingual.tsv"), path("comparison.txt"),
        path("comparison.json"),    path("reports.json")};
    outputs.insert(outputs.end(), result.metrics_log_paths.begin(),
                   result.metrics_log_paths.end());
    write_manifest(path("manifest.json"), "reproduce", config.to_json(), {},
                   outputs);
    return result;
}

}  // namespace blm::experiment
