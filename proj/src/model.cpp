#include "blm/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace blm::model {

void ModelConfig::validate() const {
    if (layers < 1) throw std::runtime_error("config: layers must be >= 1");
    if (hidden < 1) throw std::runtime_error("config: hidden must be >= 1");
    if (heads < 1 || hidden % heads != 0)
        throw std::runtime_error("config: hidden must be divisible by heads");
    if (max_seq_len < 1) throw std::runtime_error("config: max_seq_len must be >= 1");
    if (vocab_size < 1) throw std::runtime_error("config: vocab_size must be >= 1");
    if (ffn_multiplier < 1)
        throw std::runtime_error("config: ffn_multiplier must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw std::runtime_error("config: dropout_rate must be in [0,1)");
}

ModelConfig ModelConfig::base_preset(int vocab_size) {
    ModelConfig c;
    c.layers = 12;
    c.hidden = 768;
    c.heads = 12;
    c.max_seq_len = 512;
    c.vocab_size = vocab_size;
    return c;
}

ModelConfig ModelConfig::tiny_preset(int vocab_size, int max_seq_len) {
    ModelConfig c;
    c.layers = 2;
    c.hidden = 64;
    c.heads = 2;
    c.max_seq_len = max_seq_len;
    c.vocab_size = vocab_size;
    return c;
}

int64_t param_count(const ModelConfig& c) {
    const int64_t H = c.hidden, V = c.vocab_size, S = c.max_seq_len;
    const int64_t F = c.ffn_multiplier * H;
    int64_t embeddings = V * H + S * H + 2 * H + 2 * H;  // tok, pos, seg, emb LN
    int64_t per_layer = 4 * (H * H + H)       // q,k,v,o projections
                        + 2 * H               // attn LN
                        + H * F + F + F * H + H  // ffn
                        + 2 * H;              // ffn LN
    int64_t heads = H * 2 + V;  // nsp head, mlm bias
    return embeddings + c.layers * per_layer + heads;
}

void ModelParams::visit(
    const std::function<void(const std::string&, Matrix&)>& fn) {
    fn("token_embeddings", token_embeddings);
    fn("position_embeddings", position_embeddings);
    fn("segment_embeddings", segment_embeddings);
    fn("emb_ln_gain", emb_ln_gain);
    fn("emb_ln_bias", emb_ln_bias);
    for (size_t l = 0; l < layers.size(); ++l) {
        std::string p = "layer." + std::to_string(l) + ".";
        auto& L = layers[l];
        fn(p + "attn_wq", L.attn_wq);
        fn(p + "attn_bq", L.attn_bq);
        fn(p + "attn_wk", L.attn_wk);
        fn(p + "attn_bk", L.attn_bk);
        fn(p + "attn_wv", L.attn_wv);
        fn(p + "attn_bv", L.attn_bv);
        fn(p + "attn_wo", L.attn_wo);
        fn(p + "attn_bo", L.attn_bo);
        fn(p + "attn_ln_gain", L.attn_ln_gain);
        fn(p + "attn_ln_bias", L.attn_ln_bias);
        fn(p + "ffn_w1", L.ffn_w1);
        fn(p + "ffn_b1", L.ffn_b1);
        fn(p + "ffn_w2", L.ffn_w2);
        fn(p + "ffn_b2", L.ffn_b2);
        fn(p + "ffn_ln_gain", L.ffn_ln_gain);
        fn(p + "ffn_ln_bias", L.ffn_ln_bias);
    }
    fn("nsp_head", nsp_head);
    fn("mlm_bias", mlm_bias);
}

void ModelParams::visit(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
    const_cast<ModelParams*>(this)->visit(
        [&](const std::string& name, Matrix& m) { fn(name, m); });
}

std::vector<Matrix*> ModelParams::tensors() {
    std::vector<Matrix*> out;
    visit([&](const std::string&, Matrix& m) { out.push_back(&m); });
    return out;
}

ModelParams ModelParams::zeros_like() const {
    ModelParams out = *this;
    out.visit([](const std::string&, Matrix& m) { m.setZero(); });
    return out;
}

bool ModelParams::all_finite() const {
    bool ok = true;
    visit([&](const std::string&, const Matrix& m) {
        if (!m.allFinite()) ok = false;
    });
    return ok;
}

ModelParams init_params(const ModelConfig& config, uint64_t seed) {
    config.validate();
    const int H = config.hidden, F = config.ffn_multiplier * config.hidden;
    ModelParams p;
    p.token_embeddings.resize(config.vocab_size, H);
    p.position_embeddings.resize(config.max_seq_len, H);
    p.segment_embeddings.resize(2, H);
    p.emb_ln_gain = Matrix::Ones(1, H);
    p.emb_ln_bias = Matrix::Zero(1, H);
    p.layers.resize(config.layers);
    for (auto& L : p.layers) {
        L.attn_wq.resize(H, H);
        L.attn_bq = Matrix::Zero(1, H);
        L.attn_wk.resize(H, H);
        L.attn_bk = Matrix::Zero(1, H);
        L.attn_wv.resize(H, H);
        L.attn_bv = Matrix::Zero(1, H);
        L.attn_wo.resize(H, H);
        L.attn_bo = Matrix::Zero(1, H);
        L.attn_ln_gain = Matrix::Ones(1, H);
        L.attn_ln_bias = Matrix::Zero(1, H);
        L.ffn_w1.resize(H, F);
        L.ffn_b1 = Matrix::Zero(1, F);
        L.ffn_w2.resize(F, H);
        L.ffn_b2 = Matrix::Zero(1, H);
        L.ffn_ln_gain = Matrix::Ones(1, H);
        L.ffn_ln_bias = Matrix::Zero(1, H);
    }
    p.nsp_head.resize(H, 2);
    p.mlm_bias = Matrix::Zero(1, config.vocab_size);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 0.02);
    auto fill = [&](Matrix& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = gauss(rng);
    };
    fill(p.token_embeddings);
    fill(p.position_embeddings);
    fill(p.segment_embeddings);
    for (auto& L : p.layers) {
        fill(L.attn_wq);
        fill(L.attn_wk);
        fill(L.attn_wv);
        fill(L.attn_wo);
        fill(L.ffn_w1);
        fill(L.ffn_w2);
    }
    fill(p.nsp_head);
    return p;
}

void MaskedBatch::validate(const ModelConfig& config) const {
    const size_t n = static_cast<size_t>(batch) * seq;
    if (batch < 1 || seq < 1) throw std::runtime_error("batch: empty batch");
    if (seq > config.max_seq_len)
        throw std::runtime_error("batch: seq " + std::to_string(seq) +
                                 " exceeds max_seq_len " +
                                 std::to_string(config.max_seq_len));
    if (input_ids.size() != n || attention_mask.size() != n ||
        segment_ids.size() != n || mlm_labels.size() != n)
        throw std::runtime_error("batch: field size mismatch with batch*seq");
    for (int id : input_ids)
        if (id < 0 || id >= config.vocab_size)
            throw std::runtime_error("batch: input id " + std::to_string(id) +
                                     " out of vocab range " +
                                     std::to_string(config.vocab_size));
    for (int id : mlm_labels)
        if (id != kNoLabel && (id < 0 || id >= config.vocab_size))
            throw std::runtime_error("batch: mlm label out of vocab range");
    for (int s : segment_ids)
        if (s != 0 && s != 1)
            throw std::runtime_error("batch: segment id must be 0 or 1");
    if (!pair_labels.empty() && pair_labels.size() != static_cast<size_t>(batch))
        throw std::runtime_error("batch: pair_labels size mismatch with batch");
}

bool has_pair_task(Objective o) { return o != Objective::MLM; }

Objective objective_from_string(const std::string& s) {
    if (s == "mlm") return Objective::MLM;
    if (s == "mlm+nsp") return Objective::MLM_NSP;
    if (s == "mlm+sop") return Objective::MLM_SOP;
    throw std::runtime_error("unknown objective: " + s);
}

std::string to_string(Objective o) {
    switch (o) {
        case Objective::MLM: return "mlm";
        case Objective::MLM_NSP: return "mlm+nsp";
        case Objective::MLM_SOP: return "mlm+sop";
    }
    return "?";
}

namespace {

constexpr double kLnEps = 1e-12;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    return cdf + x * pdf;
}

struct LnCache {
    Matrix xhat;                // rows normalized
    std::vector<double> sigma;  // per row
};

Matrix layernorm(const Matrix& x, const Matrix& gain, const Matrix& bias,
                 LnCache* cache) {
    const Eigen::Index R = x.rows(), H = x.cols();
    Matrix y(R, H);
    if (cache) {
        cache->xhat.resize(R, H);
        cache->sigma.resize(R);
    }
    for (Eigen::Index r = 0; r < R; ++r) {
        double mu = x.row(r).mean();
        double var = (x.row(r).array() - mu).square().mean();
        double sigma = std::sqrt(var + kLnEps);
        auto xhat = ((x.row(r).array() - mu) / sigma).matrix();
        y.row(r) = (xhat.array() * gain.array() + bias.array()).matrix();
        if (cache) {
            cache->xhat.row(r) = xhat;
            cache->sigma[r] = sigma;
        }
    }
    return y;
}

// Backward through y = gain*xhat + bias; returns dx, accumulates dgain/dbias.
Matrix layernorm_backward(const Matrix& dy, const LnCache& cache,
                          const Matrix& gain, Matrix& dgain, Matrix& dbias) {
    const Eigen::Index R = dy.rows(), H = dy.cols();
    Matrix dx(R, H);
    for (Eigen::Index r = 0; r < R; ++r) {
        dgain.array() += dy.row(r).array() * cache.xhat.row(r).array();
        dbias.array() += dy.row(r).array();
        Eigen::ArrayXd u = dy.row(r).array().transpose() * gain.array().transpose();
        double mu = u.mean();
        double mh = (u * cache.xhat.row(r).array().transpose()).mean();
        dx.row(r) = ((u - mu - cache.xhat.row(r).array().transpose() * mh) /
                     cache.sigma[r])
                        .matrix()
                        .transpose();
    }
    return dx;
}

struct DropoutMask {
    Matrix scale;  // elementwise multiplier (0 or 1/(1-p)); empty = identity
};

void apply_dropout(Matrix& x, double rate, std::mt19937_64* rng,
                   DropoutMask* mask) {
    if (!rng || rate <= 0.0) return;
    std::bernoulli_distribution keep(1.0 - rate);
    mask->scale.resize(x.rows(), x.cols());
    const double inv = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            mask->scale(i, j) = keep(*rng) ? inv : 0.0;
    x.array() *= mask->scale.array();
}

void dropout_backward(Matrix& dx, const DropoutMask& mask) {
    if (mask.scale.size() == 0) return;
    dx.array() *= mask.scale.array();
}

struct LayerCache {
    Matrix x_in;                       // BT x H, layer input
    Matrix q, k, v;                    // BT x H
    std::vector<Matrix> probs;         // per (b*heads): T x T attention rows
    Matrix ctx;                        // BT x H concatenated head outputs
    DropoutMask attn_drop;
    LnCache ln1;
    Matrix x_mid;                      // BT x H, after first LN
    Matrix gelu_in;                    // BT x F
    Matrix gelu_out;                   // BT x F
    DropoutMask ffn_drop;
    LnCache ln2;
};

struct EncoderCache {
    Matrix emb_sum;  // BT x H before LN
    LnCache emb_ln;
    DropoutMask emb_drop;
    std::vector<LayerCache> layers;
    Matrix h_out;  // BT x H
};

void encoder_forward(const ModelParams& p, const ModelConfig& cfg,
                     const MaskedBatch& batch, std::mt19937_64* drop_rng,
                     EncoderCache& cache) {
    batch.validate(cfg);
    const int B = batch.batch, T = batch.seq, H = cfg.hidden, A = cfg.heads;
    const int D = cfg.head_dim();
    const Eigen::Index BT = static_cast<Eigen::Index>(B) * T;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));

    cache.emb_sum.resize(BT, H);
    for (int b = 0; b < B; ++b)
        for (int t = 0; t < T; ++t) {
            int r = batch.at(b, t);
            cache.emb_sum.row(r) = p.token_embeddings.row(batch.input_ids[r]) +
                                   p.position_embeddings.row(t) +
                                   p.segment_embeddings.row(batch.segment_ids[r]);
        }
    Matrix x = layernorm(cache.emb_sum, p.emb_ln_gain, p.emb_ln_bias, &cache.emb_ln);
    apply_dropout(x, cfg.dropout_rate, drop_rng, &cache.emb_drop);

    cache.layers.resize(cfg.layers);
    for (int l = 0; l < cfg.layers; ++l) {
        LayerCache& lc = cache.layers[l];
        const LayerParams& L = p.layers[l];
        lc.x_in = x;
        lc.q = (x * L.attn_wq).rowwise() + L.attn_bq.row(0);
        lc.k = (x * L.attn_wk).rowwise() + L.attn_bk.row(0);
        lc.v = (x * L.attn_wv).rowwise() + L.attn_bv.row(0);

        lc.ctx.resize(BT, H);
        lc.probs.assign(static_cast<size_t>(B) * A, Matrix());
        for (int b = 0; b < B; ++b) {
            for (int h = 0; h < A; ++h) {
                auto qb = lc.q.block(b * T, h * D, T, D);
                auto kb = lc.k.block(b * T, h * D, T, D);
                auto vb = lc.v.block(b * T, h * D, T, D);
                Matrix scores = qb * kb.transpose() * inv_sqrt_d;  // T x T
                Matrix& probs = lc.probs[static_cast<size_t>(b) * A + h];
                probs = Matrix::Zero(T, T);
                for (int i = 0; i < T; ++i) {
                    double mx = -std::numeric_limits<double>::infinity();
                    for (int j = 0; j < T; ++j)
                        if (batch.attention_mask[batch.at(b, j)])
                            mx = std::max(mx, scores(i, j));
                    double z = 0.0;
                    for (int j = 0; j < T; ++j)
                        if (batch.attention_mask[batch.at(b, j)]) {
                            probs(i, j) = std::exp(scores(i, j) - mx);
                            z += probs(i, j);
                        }
                    // Masked keys get exactly zero weight.
                    if (z > 0.0) probs.row(i) /= z;
                }
                lc.ctx.block(b * T, h * D, T, D) = probs * vb;
            }
        }
        Matrix attn = (lc.ctx * L.attn_wo).rowwise() + L.attn_bo.row(0);
        apply_dropout(attn, cfg.dropout_rate, drop_rng, &lc.attn_drop);
        lc.x_mid = layernorm(x + attn, L.attn_ln_gain, L.attn_ln_bias, &lc.ln1);

        lc.gelu_in = (lc.x_mid * L.ffn_w1).rowwise() + L.ffn_b1.row(0);
        lc.gelu_out = lc.gelu_in.unaryExpr([](double v) { return gelu(v); });
        Matrix ffn = (lc.gelu_out * L.ffn_w2).rowwise() + L.ffn_b2.row(0);
        apply_dropout(ffn, cfg.dropout_rate, drop_rng, &lc.ffn_drop);
        x = layernorm(lc.x_mid + ffn, L.ffn_ln_gain, L.ffn_ln_bias, &lc.ln2);
    }
    cache.h_out = std::move(x);
}

// dH accumulates the gradient w.r.t. the encoder output; on return `grads`
// holds the gradient of every parameter reached through the encoder.
void encoder_backward(const ModelParams& p, const ModelConfig& cfg,
                      const MaskedBatch& batch, const EncoderCache& cache,
                      Matrix dh, ModelParams& grads) {
    const int B = batch.batch, T = batch.seq, H = cfg.hidden, A = cfg.heads;
    const int D = cfg.head_dim();
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));

    for (int l = cfg.layers - 1; l >= 0; --l) {
        const LayerCache& lc = cache.layers[l];
        const LayerParams& L = p.layers[l];
        LayerParams& G = grads.layers[l];

        // LN after FFN
        Matrix d_sum2 =
            layernorm_backward(dh, lc.ln2, L.ffn_ln_gain, G.ffn_ln_gain, G.ffn_ln_bias);
        Matrix d_ffn = d_sum2;
        Matrix d_xmid = d_sum2;
        dropout_backward(d_ffn, lc.ffn_drop);

        G.ffn_w2 += lc.gelu_out.transpose() * d_ffn;
        G.ffn_b2 += d_ffn.colwise().sum();
        Matrix d_gelu_out = d_ffn * L.ffn_w2.transpose();
        Matrix d_gelu_in =
            d_gelu_out.array() *
            lc.gelu_in.unaryExpr([](double v) { return gelu_grad(v); }).array();
        G.ffn_w1 += lc.x_mid.transpose() * d_gelu_in;
        G.ffn_b1 += d_gelu_in.colwise().sum();
        d_xmid += d_gelu_in * L.ffn_w1.transpose();

        // LN after attention
        Matrix d_sum1 = layernorm_backward(d_xmid, lc.ln1, L.attn_ln_gain,
                                           G.attn_ln_gain, G.attn_ln_bias);
        Matrix d_attn = d_sum1;
        Matrix dx = d_sum1;  // gradient w.r.t. layer input (residual branch)
        dropout_backward(d_attn, lc.attn_drop);

        G.attn_wo += lc.ctx.transpose() * d_attn;
        G.attn_bo += d_attn.colwise().sum();
        Matrix d_ctx = d_attn * L.attn_wo.transpose();

        Matrix dq = Matrix::Zero(dh.rows(), H);
        Matrix dk = Matrix::Zero(dh.rows(), H);
        Matrix dv = Matrix::Zero(dh.rows(), H);
        for (int b = 0; b < B; ++b) {
            for (int h = 0; h < A; ++h) {
                const Matrix& probs = lc.probs[static_cast<size_t>(b) * A + h];
                auto qb = lc.q.block(b * T, h * D, T, D);
                auto kb = lc.k.block(b * T, h * D, T, D);
                auto vb = lc.v.block(b * T, h * D, T, D);
                auto d_ctx_b = d_ctx.block(b * T, h * D, T, D);
                Matrix d_probs = d_ctx_b * vb.transpose();  // T x T
                dv.block(b * T, h * D, T, D) += probs.transpose() * d_ctx_b;
                Matrix d_scores(T, T);
                for (int i = 0; i < T; ++i) {
                    double dot = 0.0;
                    for (int j = 0; j < T; ++j) dot += d_probs(i, j) * probs(i, j);
                    for (int j = 0; j < T; ++j)
                        d_scores(i, j) = probs(i, j) * (d_probs(i, j) - dot);
                }
                dq.block(b * T, h * D, T, D) += d_scores * kb * inv_sqrt_d;
                dk.block(b * T, h * D, T, D) +=
                    d_scores.transpose() * qb * inv_sqrt_d;
            }
        }
        G.attn_wq += lc.x_in.transpose() * dq;
        G.attn_bq += dq.colwise().sum();
        G.attn_wk += lc.x_in.transpose() * dk;
        G.attn_bk += dk.colwise().sum();
        G.attn_wv += lc.x_in.transpose() * dv;
        G.attn_bv += dv.colwise().sum();
        dx += dq * L.attn_wq.transpose() + dk * L.attn_wk.transpose() +
              dv * L.attn_wv.transpose();
        dh = std::move(dx);
    }

    dropout_backward(dh, cache.emb_drop);
    Matrix d_emb = layernorm_backward(dh, cache.emb_ln, p.emb_ln_gain,
                                      grads.emb_ln_gain, grads.emb_ln_bias);
    for (int b = 0; b < B; ++b)
        for (int t = 0; t < T; ++t) {
            int r = batch.at(b, t);
            grads.token_embeddings.row(batch.input_ids[r]) += d_emb.row(r);
            grads.position_embeddings.row(t) += d_emb.row(r);
            grads.segment_embeddings.row(batch.segment_ids[r]) += d_emb.row(r);
        }
}

Eigen::RowVectorXd softmax_row(const Eigen::RowVectorXd& logits) {
    double mx = logits.maxCoeff();
    Eigen::ArrayXd e = (logits.array() - mx).exp();
    return (e / e.sum()).matrix().transpose();
}

}  // namespace

ForwardResult forward(const ModelParams& params, const ModelConfig& config,
                      const MaskedBatch& batch) {
    EncoderCache cache;
    encoder_forward(params, config, batch, nullptr, cache);
    ForwardResult out;
    out.mlm_logits = cache.h_out * params.token_embeddings.transpose();
    out.mlm_logits.rowwise() += params.mlm_bias.row(0);
    out.pair_logits.resize(batch.batch, 2);
    for (int b = 0; b < batch.batch; ++b)
        out.pair_logits.row(b) = cache.h_out.row(batch.at(b, 0)) * params.nsp_head;
    return out;
}

LossGrads loss_and_grads(const ModelParams& params, const ModelConfig& config,
                         const MaskedBatch& batch, Objective objective,
                         std::optional<uint64_t> dropout_seed) {
    if (has_pair_task(objective) && batch.pair_labels.empty())
        throw std::runtime_error("objective requires pair labels but batch has none");

    std::mt19937_64 rng(dropout_seed.value_or(0));
    EncoderCache cache;
    encoder_forward(params, config, batch, dropout_seed ? &rng : nullptr, cache);

    LossGrads out;
    out.grads = params.zeros_like();
    const int B = batch.batch, T = batch.seq;
    Matrix dh = Matrix::Zero(static_cast<Eigen::Index>(B) * T, config.hidden);

    std::vector<int> labeled;
    for (int r = 0; r < B * T; ++r)
        if (batch.mlm_labels[r] != kNoLabel) labeled.push_back(r);
    out.masked_count = static_cast<int64_t>(labeled.size());

    if (!labeled.empty()) {
        const double inv_m = 1.0 / static_cast<double>(labeled.size());
        for (int r : labeled) {
            Eigen::RowVectorXd logits =
                (cache.h_out.row(r) * params.token_embeddings.transpose()) +
                params.mlm_bias.row(0);
            Eigen::RowVectorXd probs = softmax_row(logits);
            int gold = batch.mlm_labels[r];
            out.mlm_loss += -std::log(std::max(probs(gold), 1e-300)) * inv_m;
            Eigen::RowVectorXd dlogits = probs * inv_m;
            dlogits(gold) -= inv_m;
            out.grads.mlm_bias += dlogits;
            dh.row(r) += dlogits * params.token_embeddings;
            out.grads.token_embeddings.noalias() +=
                dlogits.transpose() * cache.h_out.row(r);
        }
    }

    if (has_pair_task(objective)) {
        const double inv_b = 1.0 / static_cast<double>(B);
        for (int b = 0; b < B; ++b) {
            Eigen::RowVectorXd logits =
                cache.h_out.row(batch.at(b, 0)) * params.nsp_head;
            Eigen::RowVectorXd probs = softmax_row(logits);
            int gold = batch.pair_labels[b];
            if (gold != 0 && gold != 1)
                throw std::runtime_error("pair label must be 0 or 1");
            out.pair_loss += -std::log(std::max(probs(gold), 1e-300)) * inv_b;
            Eigen::RowVectorXd dlogits = probs * inv_b;
            dlogits(gold) -= inv_b;
            out.grads.nsp_head.noalias() +=
                cache.h_out.row(batch.at(b, 0)).transpose() * dlogits;
            dh.row(batch.at(b, 0)) += dlogits * params.nsp_head.transpose();
        }
    }

    out.loss = out.mlm_loss + out.pair_loss;
    encoder_backward(params, config, batch, cache, std::move(dh), out.grads);
    return out;
}

AdamState AdamState::zeros_like(const ModelParams& params) {
    AdamState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    return s;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               double lr, int64_t step, const AdamHyper& hyper) {
    if (step < 1) throw std::runtime_error("adam step must be >= 1");
    if (!grads.all_finite())
        throw std::runtime_error("gradient overflow at step " +
                                 std::to_string(step));
    auto ps = params.tensors();
    auto gs = const_cast<ModelParams&>(grads).tensors();
    auto ms = state.m.tensors();
    auto vs = state.v.tensors();
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
    for (size_t i = 0; i < ps.size(); ++i) {
        Matrix& m = *ms[i];
        Matrix& v = *vs[i];
        const Matrix& g = *gs[i];
        m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
        v = hyper.beta2 * v.array().matrix() +
            (1.0 - hyper.beta2) * g.array().square().matrix();
        Matrix mhat = m / bc1;
        Matrix vhat = v / bc2;
        ps[i]->array() -= lr * mhat.array() / (vhat.array().sqrt() + hyper.epsilon);
    }
    if (!params.all_finite())
        throw std::runtime_error("non-finite parameter after step " +
                                 std::to_string(step));
}

}  // namespace blm::model
