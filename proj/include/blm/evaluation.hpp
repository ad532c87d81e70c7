#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blm/model.hpp"

namespace blm::evaluation {

struct EvalReport {
    double mlm_accuracy = 0.0;
    std::optional<double> pair_accuracy;
    double mlm_loss_nats = 0.0;
    double perplexity = 1.0;
    int64_t masked_token_count = 0;
    int64_t pair_count = 0;
    bool clamped = false;  // some gold-token log-prob hit the -50 nat floor

    std::string to_json() const;
    static EvalReport from_json(const std::string& json_text);
};

// Perplexity over gold-token log-probs (natural log):
// PP = exp(-mean(log p)) = P(w1..wN)^(-1/N).
double perplexity_from_log_probs(const std::vector<double>& log_probs);

// Scores eval batches in one pass: MLM accuracy and mean masked NLL (nats),
// pair accuracy when the objective has a pair task, perplexity as
// exp(mean NLL). Gold-token log-probs are clamped at -50 nats.
EvalReport evaluate(const model::ModelParams& params,
                    const model::ModelConfig& config,
                    const std::vector<model::MaskedBatch>& batches,
                    model::Objective objective);

double mlm_accuracy(const model::ModelParams& params,
                    const model::ModelConfig& config,
                    const std::vector<model::MaskedBatch>& batches);

double pair_accuracy(const model::ModelParams& params,
                     const model::ModelConfig& config,
                     const std::vector<model::MaskedBatch>& batches,
                     model::Objective objective);

double perplexity(const model::ModelParams& params,
                  const model::ModelConfig& config,
                  const std::vector<model::MaskedBatch>& batches);

struct ComparisonTable {
    std::vector<std::string> names;
    std::map<std::string, EvalReport> reports;
    // metric -> winner name; absent when tied.
    std::map<std::string, std::string> best;

    std::string render_text() const;  // aligned plain text
    std::string to_json() const;
};

// Marks the best value per metric (higher is better for accuracies, lower
// for loss and perplexity). Exact ties leave the metric without a winner.
ComparisonTable compare_regimes(
    const std::map<std::string, EvalReport>& reports);

}  // namespace blm::evaluation
