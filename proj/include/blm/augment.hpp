#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blm/bpe.hpp"
#include "blm/model.hpp"

namespace blm::augment {

enum class Origin { Shared, NewFromX, RetainedFromY };
std::string to_string(Origin o);
Origin origin_from_string(const std::string& s);

struct MapEntry {
    std::string token;
    int new_id;
    Origin origin;
};

struct AugmentationMap {
    std::vector<MapEntry> entries;  // ordered by new_id
    int64_t shared_count = 0;
    int64_t x_only_count = 0;
    int64_t y_only_count = 0;

    void save_tsv(const std::string& path) const;
    static AugmentationMap load_tsv(const std::string& path);
};

struct AugmentationReport {
    double overlap_ratio = 0.0;   // lexically shared / |V(x)|
    bool precondition_eq1 = false;
    bool precondition_eq2 = false;  // diagnostic only, never enforced
    int64_t shared_count = 0;
    int64_t augmented_size = 0;
};

// Reports whether augmentation applies. The intersection is taken over
// lexical tokens: special tokens and single-codepoint tokens (the byte
// alphabet every trained vocabulary carries) are excluded from the
// diagnostic, since they overlap by construction.
AugmentationReport check_preconditions(const bpe::Vocabulary& vx,
                                       const bpe::Vocabulary& vy);

// Merges V(x) into V(y): shared tokens keep their V(y) ids, x-only tokens
// fill the non-shared slots in V(x) relative order (displacing the y-only
// tokens there), leftover y-only tokens stay put, surplus x-only tokens are
// appended past |V(y)|-1.
std::pair<bpe::Vocabulary, AugmentationMap> augment(const bpe::Vocabulary& vy,
                                                    const bpe::Vocabulary& vx);

enum class InitPolicy { Gaussian, MeanOfShared };
InitPolicy init_policy_from_string(const std::string& s);

// Transplants params trained over V(y) onto the augmented vocabulary:
// Shared / RetainedFromY rows are copied bit-exactly (their ids do not
// change), NewFromX rows are initialized per policy, everything else is
// copied unchanged. The tied MLM projection follows the embedding matrix;
// its bias gets zeros for new tokens.
model::ModelParams embedding_surgery(const model::ModelParams& params,
                                     const model::ModelConfig& config,
                                     const AugmentationMap& map,
                                     InitPolicy policy, uint64_t seed,
                                     model::ModelConfig* out_config = nullptr);

}  // namespace blm::augment
