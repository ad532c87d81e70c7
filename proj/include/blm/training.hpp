#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "blm/augment.hpp"
#include "blm/bpe.hpp"
#include "blm/checkpoint.hpp"
#include "blm/corpus.hpp"
#include "blm/evaluation.hpp"
#include "blm/model.hpp"

namespace blm::training {

enum class Regime { FromScratch, ContinuedBilingual, ContinuedMultilingual };
Regime regime_from_string(const std::string& s);
std::string to_string(Regime r);

struct TrainingConfig {
    Regime regime = Regime::FromScratch;
    int64_t steps = 100;
    double lr = 1e-4;
    int batch_size = 16;
    int seq_len = 64;
    double mask_rate = 0.15;
    model::Objective objective = model::Objective::MLM_NSP;
    uint64_t seed = 0;
    int64_t eval_every = 50;

    void validate() const;
};

struct StepRecord {
    int64_t step;
    double loss;
};

struct EvalRecord {
    int64_t step;
    evaluation::EvalReport report;
};

struct MetricsLog {
    std::vector<StepRecord> steps;
    std::vector<EvalRecord> evals;

    std::string to_jsonl() const;  // line-delimited JSON records
    void save(const std::string& path) const;
};

struct SentencePair {
    std::string first;
    std::string second;  // empty for single-sentence items
    int label = -1;      // 0/1 for pair tasks
};

// NSP: 50% true next-sentence pairs, 50% second sentence replaced by a random
// sentence from another document. SOP: 50% in order, 50% the same pair
// swapped. MLM objective yields single sentences without labels.
std::vector<SentencePair> make_sentence_pairs(const corpus::Corpus& corpus,
                                              model::Objective objective,
                                              uint64_t seed);

// Encodes and masks a slice of items. Labeled positions are chosen i.i.d. at
// mask_rate over non-special tokens; 80% become the mask token, 10% a uniform
// random vocab token, 10% stay. Items empty after tokenization are skipped;
// over-long items are truncated (longest sentence first).
model::MaskedBatch prepare_mlm_batch(const std::vector<SentencePair>& items,
                                     const bpe::BpeModel& bpe, int seq_len,
                                     double mask_rate, bool pair_task,
                                     std::mt19937_64& rng);

struct PretrainData {
    const corpus::Corpus* train = nullptr;
    const corpus::Corpus* valid = nullptr;  // may be null: no eval snapshots
    const bpe::BpeModel* tokenizer = nullptr;
};

struct PretrainResult {
    model::ModelParams params;
    model::ModelConfig config;
    MetricsLog log;
};

// Runs one pretraining regime. FromScratch initializes fresh params;
// continued regimes transplant the base checkpoint through embedding surgery
// (identity when no augmentation map is given) and then train. Exactly
// config.steps optimizer steps run.
PretrainResult run_pretraining(const PretrainData& data,
                               const TrainingConfig& config,
                               const model::ModelConfig& arch,
                               const model::Checkpoint* base = nullptr,
                               const augment::AugmentationMap* map = nullptr);

// Two synthetic languages built from word-class templates; corpus_lo draws
// shared_fraction of its word types from corpus_hi's lexicon (code-switched
// sharing). Non-shared words use disjoint letter inventories.
std::pair<corpus::Corpus, corpus::Corpus> synth_bilingual_corpus(
    double shared_fraction, int64_t sentences, uint64_t seed);

// Additional synthetic languages (disjoint from both the hi and lo
// inventories) for the desk-scale multilingual baseline.
corpus::Corpus synth_distractor_corpus(int index, int64_t sentences,
                                       uint64_t seed);

}  // namespace blm::training
