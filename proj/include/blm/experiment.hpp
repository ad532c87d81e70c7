#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "blm/evaluation.hpp"
#include "blm/model.hpp"
#include "blm/training.hpp"

namespace blm::experiment {

// Desk-scale three-regime comparison: from-scratch monolingual, continued
// bilingual (after vocabulary augmentation + embedding surgery), continued
// multilingual (base pretrained on several synthetic languages sharing one
// vocabulary).
struct ExperimentConfig {
    double shared_fraction = 0.5;
    int64_t sentences = 20000;
    uint64_t corpus_seed = 777;
    int vocab_size = 512;
    int64_t steps = 500;
    int64_t base_steps = 1800;
    std::vector<uint64_t> seeds = {1, 2, 3};
    double lr_scratch = 1e-3;
    double lr_continued = 6e-4;
    int batch_size = 16;
    int seq_len = 40;
    double mask_rate = 0.15;
    model::Objective objective = model::Objective::MLM_NSP;
    int64_t eval_every = 100;
    double valid_fraction = 0.05;
    int distractor_languages = 3;  // in addition to the high-resource language
    model::ModelConfig arch = model::ModelConfig::tiny_preset(512, 40);

    static ExperimentConfig from_json_file(const std::string& path);
    static ExperimentConfig from_json(const std::string& json_text);
    std::string to_json() const;
    void validate() const;
};

struct RegimeOutcome {
    std::vector<evaluation::EvalReport> per_seed;
    evaluation::EvalReport median;  // componentwise median across seeds
};

struct ExperimentResult {
    std::map<std::string, RegimeOutcome> regimes;  // keyed by regime name
    evaluation::ComparisonTable comparison;        // over the medians
    std::vector<std::string> metrics_log_paths;    // in write order
};

// Runs the full comparison; artifacts (corpora, vocabularies, metrics logs,
// reports, comparison table, manifest) land under out_dir. Partial results
// are preserved when a regime fails.
ExperimentResult reproduce_experiment(const ExperimentConfig& config,
                                      const std::string& out_dir);

// One manifest per artifact-producing command: resolved configuration, seeds,
// input/output paths with content digests, tool version, timestamp.
void write_manifest(const std::string& path, const std::string& command,
                    const std::string& config_json,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs);

std::string file_digest(const std::string& path);

evaluation::EvalReport median_report(
    const std::vector<evaluation::EvalReport>& reports);

}  // namespace blm::experiment
