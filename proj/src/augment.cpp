#include "blm/augment.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include "blm/text.hpp"

namespace blm::augment {

std::string to_string(Origin o) {
    switch (o) {
        case Origin::Shared: return "Shared";
        case Origin::NewFromX: return "NewFromX";
        case Origin::RetainedFromY: return "RetainedFromY";
    }
    return "?";
}

Origin origin_from_string(const std::string& s) {
    if (s == "Shared") return Origin::Shared;
    if (s == "NewFromX") return Origin::NewFromX;
    if (s == "RetainedFromY") return Origin::RetainedFromY;
    throw std::runtime_error("unknown origin: " + s);
}

void AugmentationMap::save_tsv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "token\tid\torigin\n";
    for (const auto& e : entries)
        out << e.token << '\t' << e.new_id << '\t' << to_string(e.origin) << '\n';
}

AugmentationMap AugmentationMap::load_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "token\tid\torigin")
        throw std::runtime_error("bad augmentation map header");
    AugmentationMap map;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t t1 = line.find('\t');
        size_t t2 = line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos)
            throw std::runtime_error("malformed map line: " + line);
        MapEntry e;
        e.token = line.substr(0, t1);
        e.new_id = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
        e.origin = origin_from_string(line.substr(t2 + 1));
        map.entries.push_back(std::move(e));
    }
    std::sort(map.entries.begin(), map.entries.end(),
              [](const MapEntry& a, const MapEntry& b) { return a.new_id < b.new_id; });
    for (const auto& e : map.entries) switch (e.origin) {
        case Origin::Shared: ++map.shared_count; break;
        case Origin::NewFromX: ++map.x_only_count; break;
        case Origin::RetainedFromY: ++map.y_only_count; break;
    }
    return map;
}

namespace {

bool is_special(const std::string& token) {
    const auto& specials = bpe::default_special_tokens();
    return std::find(specials.begin(), specials.end(), token) != specials.end();
}

// Single-codepoint tokens are the byte alphabet that every trained
// vocabulary shares; they carry no lexical signal.
bool is_lexical(const std::string& token) {
    if (is_special(token)) return false;
    return text::to_codepoints(token).size() > 1;
}

int64_t lexical_shared_count(const bpe::Vocabulary& vx, const bpe::Vocabulary& vy) {
    int64_t shared = 0;
    for (const auto& t : vx.tokens())
        if (is_lexical(t) && vy.contains(t)) ++shared;
    return shared;
}

}  // namespace

AugmentationReport check_preconditions(const bpe::Vocabulary& vx,
                                       const bpe::Vocabulary& vy) {
    AugmentationReport rep;
    int64_t lexical_x = 0;
    int64_t shared = 0;
    bool y_subset_of_x = true;
    for (const auto& t : vx.tokens()) {
        if (!is_lexical(t)) continue;
        ++lexical_x;
        if (vy.contains(t)) ++shared;
    }
    for (const auto& t : vy.tokens()) {
        if (!is_lexical(t)) continue;
        if (!vx.contains(t)) y_subset_of_x = false;
    }
    rep.shared_count = shared;
    rep.precondition_eq1 = shared > 0;
    rep.precondition_eq2 = y_subset_of_x;
    rep.overlap_ratio =
        lexical_x == 0 ? 0.0
                       : static_cast<double>(shared) / static_cast<double>(lexical_x);
    int64_t all_shared = 0;
    for (const auto& t : vx.tokens())
        if (vy.contains(t)) ++all_shared;
    rep.augmented_size =
        std::max<int64_t>(static_cast<int64_t>(vy.size()),
                          static_cast<int64_t>(vy.size() + vx.size()) - all_shared);
    return rep;
}

std::pair<bpe::Vocabulary, AugmentationMap> augment(const bpe::Vocabulary& vy,
                                                    const bpe::Vocabulary& vx) {
    if (lexical_shared_count(vx, vy) == 0)
        throw std::runtime_error("no shared vocabulary — augmentation inapplicable");

    std::unordered_set<std::string> shared;
    for (const auto& t : vx.tokens())
        if (vy.contains(t)) shared.insert(t);

    const size_t ny = vy.size();
    std::vector<std::string> z(ny);
    std::vector<Origin> origin(ny, Origin::RetainedFromY);

    std::vector<size_t> free_slots;
    for (size_t j = 0; j < ny; ++j) {
        z[j] = vy.tokens()[j];
        if (shared.count(z[j])) {
            origin[j] = Origin::Shared;
        } else {
            free_slots.push_back(j);
        }
    }

    std::vector<std::string> x_only;
    for (const auto& t : vx.tokens())
        if (!shared.count(t)) x_only.push_back(t);

    size_t k = 0;
    for (; k < x_only.size() && k < free_slots.size(); ++k) {
        z[free_slots[k]] = x_only[k];
        origin[free_slots[k]] = Origin::NewFromX;
    }
    for (; k < x_only.size(); ++k) {  // |V(x)| > |V(y)|: grow by append
        z.push_back(x_only[k]);
        origin.push_back(Origin::NewFromX);
    }

    AugmentationMap map;
    map.entries.reserve(z.size());
    for (size_t j = 0; j < z.size(); ++j) {
        map.entries.push_back({z[j], static_cast<int>(j), origin[j]});
        switch (origin[j]) {
            case Origin::Shared: ++map.shared_count; break;
            case Origin::NewFromX: ++map.x_only_count; break;
            case Origin::RetainedFromY: ++map.y_only_count; break;
        }
    }
    return {bpe::Vocabulary(std::move(z)), std::move(map)};
}

InitPolicy init_policy_from_string(const std::string& s) {
    if (s == "gaussian") return InitPolicy::Gaussian;
    if (s == "mean-of-shared") return InitPolicy::MeanOfShared;
    throw std::runtime_error("unknown init policy: " + s);
}

model::ModelParams embedding_surgery(const model::ModelParams& params,
                                     const model::ModelConfig& config,
                                     const AugmentationMap& map,
                                     InitPolicy policy, uint64_t seed,
                                     model::ModelConfig* out_config) {
    const auto old_vocab = static_cast<int64_t>(params.token_embeddings.rows());
    if (old_vocab != config.vocab_size || params.mlm_bias.cols() != config.vocab_size)
        throw std::runtime_error("params/vocab mismatch");
    for (const auto& e : map.entries)
        if (e.origin != Origin::NewFromX && e.new_id >= old_vocab)
            throw std::runtime_error("params/vocab mismatch");

    const auto new_vocab = static_cast<int64_t>(map.entries.size());
    if (new_vocab < old_vocab)  // augmentation never shrinks a vocabulary
        throw std::runtime_error("params/vocab mismatch");
    model::ModelParams out = params;  // non-embedding weights copied unchanged
    out.token_embeddings.resize(new_vocab, config.hidden);
    out.token_embeddings.setZero();
    out.mlm_bias = model::Matrix::Zero(1, new_vocab);

    Eigen::RowVectorXd shared_mean = Eigen::RowVectorXd::Zero(config.hidden);
    int64_t shared_n = 0;
    for (const auto& e : map.entries)
        if (e.origin == Origin::Shared) {
            shared_mean += params.token_embeddings.row(e.new_id);
            ++shared_n;
        }
    if (shared_n > 0) shared_mean /= static_cast<double>(shared_n);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 0.02);
    for (const auto& e : map.entries) {
        if (e.origin == Origin::NewFromX) {
            if (policy == InitPolicy::MeanOfShared) {
                out.token_embeddings.row(e.new_id) = shared_mean;
            } else {
                for (int j = 0; j < config.hidden; ++j)
                    out.token_embeddings(e.new_id, j) = gauss(rng);
            }
        } else {
            // Shared and RetainedFromY ids are unchanged by construction.
            out.token_embeddings.row(e.new_id) =
                params.token_embeddings.row(e.new_id);
            out.mlm_bias(0, e.new_id) = params.mlm_bias(0, e.new_id);
        }
    }

    if (out_config) {
        *out_config = config;
        out_config->vocab_size = static_cast<int>(new_vocab);
    }
    return out;
}

}  // namespace blm::augment
