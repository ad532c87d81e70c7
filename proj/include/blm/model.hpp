#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace blm::model {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
    int layers = 12;
    int hidden = 768;
    int heads = 12;
    int max_seq_len = 512;
    int vocab_size = 30000;
    int ffn_multiplier = 4;
    double dropout_rate = 0.1;

    void validate() const;
    int head_dim() const { return hidden / heads; }

    static ModelConfig base_preset(int vocab_size = 30000);
    static ModelConfig tiny_preset(int vocab_size = 512, int max_seq_len = 64);
};

// Closed-form parameter count; no tensors are allocated.
int64_t param_count(const ModelConfig& config);

struct LayerParams {
    Matrix attn_wq, attn_bq, attn_wk, attn_bk, attn_wv, attn_bv, attn_wo, attn_bo;
    Matrix attn_ln_gain, attn_ln_bias;
    Matrix ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Matrix ffn_ln_gain, ffn_ln_bias;
};

struct ModelParams {
    Matrix token_embeddings;     // vocab x hidden
    Matrix position_embeddings;  // max_seq_len x hidden
    Matrix segment_embeddings;   // 2 x hidden
    Matrix emb_ln_gain, emb_ln_bias;
    std::vector<LayerParams> layers;
    Matrix nsp_head;  // hidden x 2
    Matrix mlm_bias;  // 1 x vocab (output projection tied to token_embeddings)

    // Enumerates every tensor in a fixed order.
    void visit(const std::function<void(const std::string&, Matrix&)>& fn);
    void visit(const std::function<void(const std::string&, const Matrix&)>& fn) const;
    std::vector<Matrix*> tensors();

    ModelParams zeros_like() const;
    bool all_finite() const;
};

ModelParams init_params(const ModelConfig& config, uint64_t seed);

// Mask/random/keep sentinel for unlabeled positions.
constexpr int kNoLabel = -1;

struct MaskedBatch {
    int batch = 0;
    int seq = 0;
    std::vector<int> input_ids;         // batch*seq
    std::vector<uint8_t> attention_mask;  // batch*seq, 1 = real token
    std::vector<int> segment_ids;       // batch*seq, 0 or 1
    std::vector<int> mlm_labels;        // batch*seq, kNoLabel where unlabeled
    std::vector<int> pair_labels;       // batch (empty when no pair task)

    int at(int b, int t) const { return b * seq + t; }
    void validate(const ModelConfig& config) const;
};

enum class Objective { MLM, MLM_NSP, MLM_SOP };
bool has_pair_task(Objective o);
Objective objective_from_string(const std::string& s);
std::string to_string(Objective o);

struct ForwardResult {
    Matrix mlm_logits;   // (batch*seq) x vocab
    Matrix pair_logits;  // batch x 2
};

// Eval-mode forward pass (dropout off); deterministic.
ForwardResult forward(const ModelParams& params, const ModelConfig& config,
                      const MaskedBatch& batch);

struct LossGrads {
    double loss = 0.0;       // nats
    double mlm_loss = 0.0;
    double pair_loss = 0.0;
    int64_t masked_count = 0;
    ModelParams grads;
};

// Exact analytic gradients for the full computation graph. When
// `dropout_seed` is absent the pass runs without dropout (needed for
// finite-difference checks and eval-style losses).
LossGrads loss_and_grads(const ModelParams& params, const ModelConfig& config,
                         const MaskedBatch& batch, Objective objective,
                         std::optional<uint64_t> dropout_seed = std::nullopt);

struct AdamState {
    ModelParams m;
    ModelParams v;
    static AdamState zeros_like(const ModelParams& params);
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// In-place Adam update with bias correction; `step` is 1-based.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               double lr, int64_t step, const AdamHyper& hyper = {});

}  // namespace blm::model
