#include "blm/evaluation.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace blm::evaluation {

std::string EvalReport::to_json() const {
    nlohmann::json j = {{"mlm_accuracy", mlm_accuracy},
                        {"mlm_loss_nats", mlm_loss_nats},
                        {"perplexity", perplexity},
                        {"masked_token_count", masked_token_count},
                        {"pair_count", pair_count},
                        {"clamped", clamped}};
    if (pair_accuracy) j["pair_accuracy"] = *pair_accuracy;
    return j.dump();
}

EvalReport EvalReport::from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    EvalReport r;
    r.mlm_accuracy = j.at("mlm_accuracy").get<double>();
    r.mlm_loss_nats = j.at("mlm_loss_nats").get<double>();
    r.perplexity = j.at("perplexity").get<double>();
    r.masked_token_count = j.at("masked_token_count").get<int64_t>();
    r.pair_count = j.at("pair_count").get<int64_t>();
    r.clamped = j.value("clamped", false);
    if (j.contains("pair_accuracy"))
        r.pair_accuracy = j.at("pair_accuracy").get<double>();
    return r;
}

double perplexity_from_log_probs(const std::vector<double>& log_probs) {
    if (log_probs.empty()) throw std::runtime_error("empty evaluation set");
    double sum = 0.0;
    for (double lp : log_probs) sum += lp;
    return std::exp(-sum / static_cast<double>(log_probs.size()));
}

EvalReport evaluate(const model::ModelParams& params,
                    const model::ModelConfig& config,
                    const std::vector<model::MaskedBatch>& batches,
                    model::Objective objective) {
    EvalReport rep;
    double nll_sum = 0.0;
    int64_t correct = 0;
    int64_t pair_correct = 0;
    for (const auto& batch : batches) {
        model::ForwardResult fwd = model::forward(params, config, batch);
        for (int r = 0; r < batch.batch * batch.seq; ++r) {
            int gold = batch.mlm_labels[r];
            if (gold == model::kNoLabel) continue;
            Eigen::RowVectorXd logits = fwd.mlm_logits.row(r);
            double mx = logits.maxCoeff();
            double z = (logits.array() - mx).exp().sum();
            double logp = logits(gold) - mx - std::log(z);
            if (logp < -50.0) {
                logp = -50.0;
                rep.clamped = true;
            }
            nll_sum += -logp;
            Eigen::Index argmax;
            logits.maxCoeff(&argmax);
            if (static_cast<int>(argmax) == gold) ++correct;
            ++rep.masked_token_count;
        }
        if (model::has_pair_task(objective)) {
            if (batch.pair_labels.empty())
                throw std::runtime_error("objective requires pair labels");
            for (int b = 0; b < batch.batch; ++b) {
                int pred = fwd.pair_logits(b, 0) >= fwd.pair_logits(b, 1) ? 0 : 1;
                if (pred == batch.pair_labels[b]) ++pair_correct;
                ++rep.pair_count;
            }
        }
    }
    if (rep.masked_token_count == 0)
        throw std::runtime_error("empty evaluation set");
    rep.mlm_accuracy =
        static_cast<double>(correct) / static_cast<double>(rep.masked_token_count);
    rep.mlm_loss_nats = nll_sum / static_cast<double>(rep.masked_token_count);
    rep.perplexity = std::exp(rep.mlm_loss_nats);
    if (model::has_pair_task(objective)) {
        if (rep.pair_count == 0) throw std::runtime_error("no pairs to evaluate");
        rep.pair_accuracy =
            static_cast<double>(pair_correct) / static_cast<double>(rep.pair_count);
    }
    return rep;
}

double mlm_accuracy(const model::ModelParams& params,
                    const model::ModelConfig& config,
                    const std::vector<model::MaskedBatch>& batches) {
    return evaluate(params, config, batches, model::Objective::MLM).mlm_accuracy;
}

double pair_accuracy(const model::ModelParams& params,
                     const model::ModelConfig& config,
                     const std::vector<model::MaskedBatch>& batches,
                     model::Objective objective) {
    if (!model::has_pair_task(objective))
        throw std::runtime_error("objective has no pair task");
    return *evaluate(params, config, batches, objective).pair_accuracy;
}

double perplexity(const model::ModelParams& params,
                  const model::ModelConfig& config,
                  const std::vector<model::MaskedBatch>& batches) {
    return evaluate(params, config, batches, model::Objective::MLM).perplexity;
}

namespace {

struct MetricDef {
    const char* name;
    bool higher_is_better;
    bool optional;
};

constexpr MetricDef kMetrics[] = {
    {"mlm_accuracy", true, false},
    {"pair_accuracy", true, true},
    {"mlm_loss_nats", false, false},
    {"perplexity", false, false},
};

std::optional<double> metric_value(const EvalReport& r, const std::string& name) {
    if (name == "mlm_accuracy") return r.mlm_accuracy;
    if (name == "pair_accuracy") return r.pair_accuracy;
    if (name == "mlm_loss_nats") return r.mlm_loss_nats;
    if (name == "perplexity") return r.perplexity;
    return std::nullopt;
}

}  // namespace

ComparisonTable compare_regimes(const std::map<std::string, EvalReport>& reports) {
    if (reports.size() < 2)
        throw std::runtime_error("need at least two reports to compare");
    ComparisonTable table;
    table.reports = reports;
    for (const auto& [name, _] : reports) table.names.push_back(name);

    for (const auto& metric : kMetrics) {
        std::string winner;
        std::optional<double> best_val;
        bool tie = false;
        for (const auto& [name, rep] : reports) {
            auto v = metric_value(rep, metric.name);
            if (!v) continue;
            if (!best_val || (metric.higher_is_better ? *v > *best_val
                                                      : *v < *best_val)) {
                best_val = v;
                winner = name;
                tie = false;
            } else if (*v == *best_val) {
                tie = true;
            }
        }
        if (best_val && !tie) table.best[metric.name] = winner;
    }
    return table;
}

std::string ComparisonTable::render_text() const {
    std::ostringstream out;
    size_t w = 14;
    for (const auto& n : names) w = std::max(w, n.size() + 2);
    out << std::string(w, ' ');
    for (const auto& metric : kMetrics) {
        out << ' ' << metric.name;
        for (size_t k = std::string(metric.name).size(); k < 14; ++k) out << ' ';
    }
    out << '\n';
    for (const auto& n : names) {
        out << n << std::string(w - n.size(), ' ');
        const EvalReport& r = reports.at(n);
        for (const auto& metric : kMetrics) {
            auto v = metric_value(r, metric.name);
            char buf[32];
            if (v)
                std::snprintf(buf, sizeof(buf), "%.4f", *v);
            else
                std::snprintf(buf, sizeof(buf), "-");
            std::string cell = buf;
            auto it = best.find(metric.name);
            if (it != best.end() && it->second == n) cell += " *";
            out << ' ' << cell;
            for (size_t k = cell.size(); k < 14; ++k) out << ' ';
        }
        out << '\n';
    }
    out << "(* best per metric)\n";
    return out.str();
}

std::string ComparisonTable::to_json() const {
    nlohmann::json j;
    for (const auto& [name, rep] : reports)
        j["reports"][name] = nlohmann::json::parse(rep.to_json());
    for (const auto& [metric, winner] : best) j["best"][metric] = winner;
    return j.dump(2);
}

}  // namespace blm::evaluation
