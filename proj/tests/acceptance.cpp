// Acceptance gate: one pass/fail line per criterion, exit 0 only if all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "blm/augment.hpp"
#include "blm/bpe.hpp"
#include "blm/checkpoint.hpp"
#include "blm/evaluation.hpp"
#include "blm/experiment.hpp"
#include "blm/model.hpp"
#include "blm/text.hpp"
#include "blm/training.hpp"

using namespace blm;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool ok,
            const std::string& detail = "") {
    std::printf("%s criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", idx,
                name.c_str(), detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Independent brute-force oracle for augmentation (set/list bookkeeping only).
// ---------------------------------------------------------------------------

struct OracleResult {
    std::vector<std::string> tokens;
    std::vector<augment::Origin> origins;
};

OracleResult oracle_augment(const std::vector<std::string>& vy,
                            const std::vector<std::string>& vx) {
    std::set<std::string> x_set(vx.begin(), vx.end());
    std::set<std::string> y_set(vy.begin(), vy.end());
    std::vector<std::string> x_only;
    for (const auto& t : vx)
        if (!y_set.count(t)) x_only.push_back(t);

    OracleResult r;
    r.tokens = vy;
    r.origins.assign(vy.size(), augment::Origin::RetainedFromY);
    for (size_t i = 0; i < vy.size(); ++i)
        if (x_set.count(vy[i])) r.origins[i] = augment::Origin::Shared;
    size_t next = 0;
    for (size_t i = 0; i < vy.size() && next < x_only.size(); ++i) {
        if (r.origins[i] != augment::Origin::RetainedFromY) continue;
        r.tokens[i] = x_only[next++];
        r.origins[i] = augment::Origin::NewFromX;
    }
    while (next < x_only.size()) {
        r.tokens.push_back(x_only[next++]);
        r.origins.push_back(augment::Origin::NewFromX);
    }
    return r;
}

struct RandomCase {
    std::vector<std::string> vy, vx;
    bool applicable;
};

RandomCase random_case(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> size_dist(1, 50);
    std::uniform_int_distribution<int> pool_pick(0, 119);
    auto draw = [&](int n) {
        std::set<std::string> s;
        while (static_cast<int>(s.size()) < n)
            s.insert("tok" + std::to_string(pool_pick(rng)));
        std::vector<std::string> v(s.begin(), s.end());
        std::shuffle(v.begin(), v.end(), rng);
        return v;
    };
    RandomCase c;
    c.vy = draw(size_dist(rng));
    c.vx = draw(size_dist(rng));
    c.applicable = false;
    std::set<std::string> y_set(c.vy.begin(), c.vy.end());
    for (const auto& t : c.vx)
        if (y_set.count(t)) c.applicable = true;
    return c;
}

// ---------------------------------------------------------------------------
// Small model fixtures
// ---------------------------------------------------------------------------

model::MaskedBatch make_batch(const model::ModelConfig& config, uint64_t seed,
                              bool pair_task, int batch = 2, int seq = 6) {
    model::MaskedBatch b;
    b.batch = batch;
    b.seq = seq;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> tok(5, config.vocab_size - 1);
    for (int i = 0; i < batch * seq; ++i) {
        b.input_ids.push_back(tok(rng));
        b.attention_mask.push_back(1);
        b.segment_ids.push_back(i % seq >= seq / 2 ? 1 : 0);
        b.mlm_labels.push_back(i % 3 == 0 ? tok(rng) : model::kNoLabel);
    }
    b.attention_mask.back() = 0;
    b.mlm_labels.back() = model::kNoLabel;
    if (pair_task)
        for (int i = 0; i < batch; ++i) b.pair_labels.push_back(i % 2);
    return b;
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

void criterion_1_augmentation_exactness() {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;

    // Worked example: V(y)=[y1..yn], V(x)=[x1..xn], intersection {y1, y3}.
    const int n = 8;
    std::vector<std::string> vy, vx;
    for (int i = 1; i <= n; ++i) {
        vy.push_back("y" + std::to_string(i));
        vx.push_back(i == 1 || i == 3 ? "y" + std::to_string(i)
                                      : "x" + std::to_string(i));
    }
    auto [vz, map] = augment::augment(bpe::Vocabulary(vy), bpe::Vocabulary(vx));
    std::vector<std::string> expect = vy;
    // z = [y1, x2, y3, x4, x5, ..., xn]
    for (int i = 1; i <= n; ++i)
        if (i != 1 && i != 3) expect[i - 1] = "x" + std::to_string(i);
    if (vz.tokens() != expect) {
        ok = false;
        detail = "worked example mismatch";
    }

    // 1,000 randomized cases against the brute-force oracle.
    std::mt19937_64 rng(0xACCE5501ull);
    for (int trial = 0; ok && trial < 1000; ++trial) {
        auto c = random_case(rng);
        if (!c.applicable) {
            try {
                augment::augment(bpe::Vocabulary(c.vy), bpe::Vocabulary(c.vx));
                ok = false;
                detail = "disjoint case not rejected";
            } catch (const std::exception&) {
            }
            continue;
        }
        auto [z, m] =
            augment::augment(bpe::Vocabulary(c.vy), bpe::Vocabulary(c.vx));
        auto oracle = oracle_augment(c.vy, c.vx);
        if (z.tokens() != oracle.tokens ||
            m.entries.size() != oracle.tokens.size()) {
            ok = false;
            detail = "oracle mismatch at trial " + std::to_string(trial);
            break;
        }
        for (size_t i = 0; i < oracle.tokens.size(); ++i)
            if (m.entries[i].origin != oracle.origins[i] ||
                m.entries[i].new_id != static_cast<int>(i)) {
                ok = false;
                detail = "origin mismatch at trial " + std::to_string(trial);
                break;
            }
    }
    double secs = seconds_since(t0);
    if (ok && secs >= 5.0) {
        ok = false;
        detail = "too slow: " + std::to_string(secs) + "s";
    }
    report(1, "augmentation exactness (worked example + 1000 oracle cases)", ok,
           detail);
}

void criterion_2_id_preservation() {
    bool ok = true;
    std::string detail;
    std::mt19937_64 rng(0xACCE5502ull);
    for (int trial = 0; ok && trial < 1000; ++trial) {
        auto c = random_case(rng);
        if (!c.applicable) continue;
        bpe::Vocabulary vy(c.vy), vx(c.vx);
        auto [vz, map] = augment::augment(vy, vx);
        for (const auto& t : c.vx) {
            int idy = vy.id_of(t);
            if (idy < 0) continue;  // not shared
            if (vz.id_of(t) != idy) {
                ok = false;
                detail = "shared token moved: " + t;
                break;
            }
        }
    }
    report(2, "id preservation for shared tokens (1000 random pairs)", ok,
           detail);
}

void criterion_3_surgery_conservation() {
    bool ok = true;
    std::string detail;

    // Build an augmentation over string vocabularies sized to a tiny model.
    std::vector<std::string> vy_toks, vx_toks;
    for (int i = 0; i < 32; ++i) vy_toks.push_back("base" + std::to_string(i));
    for (int i = 0; i < 32; ++i)
        vx_toks.push_back(i % 2 ? "base" + std::to_string(i)
                                : "newt" + std::to_string(i));
    bpe::Vocabulary vy(vy_toks), vx(vx_toks);
    auto [vz, map] = augment::augment(vy, vx);

    auto config = model::ModelConfig::tiny_preset(32, 16);
    config.layers = 1;
    config.hidden = 16;
    config.dropout_rate = 0.0;

    // Go through the on-disk checkpoint so "float-identical" means identical
    // to the float32 values the base checkpoint stores.
    auto tmp = fs::temp_directory_path() / "blm_acceptance";
    fs::create_directories(tmp);
    auto base_path = (tmp / "base.blm").string();
    model::save_checkpoint(base_path, model::init_params(config, 3), config);
    auto base = model::load_checkpoint(base_path);

    auto out = augment::embedding_surgery(base.params, base.config, map,
                                          augment::InitPolicy::Gaussian, 7);
    for (const auto& e : map.entries) {
        if (e.origin == augment::Origin::NewFromX) continue;
        if (std::memcmp(out.token_embeddings.row(e.new_id).data(),
                        base.params.token_embeddings.row(e.new_id).data(),
                        sizeof(double) * config.hidden) != 0 ||
            out.mlm_bias(0, e.new_id) != base.params.mlm_bias(0, e.new_id)) {
            ok = false;
            detail = "shared row altered: " + e.token;
            break;
        }
    }

    // Identity surgery (every token shared, ids unchanged) must reproduce
    // bit-identical logits.
    if (ok) {
        augment::AugmentationMap identity;
        for (int i = 0; i < config.vocab_size; ++i) {
            identity.entries.push_back({vy.token(i), i, augment::Origin::Shared});
            ++identity.shared_count;
        }
        auto same = augment::embedding_surgery(base.params, base.config, identity,
                                               augment::InitPolicy::Gaussian, 11);
        auto batch = make_batch(config, 5, true);
        auto fa = model::forward(base.params, config, batch);
        auto fb = model::forward(same, config, batch);
        if (std::memcmp(fa.mlm_logits.data(), fb.mlm_logits.data(),
                        sizeof(double) * fa.mlm_logits.size()) != 0 ||
            std::memcmp(fa.pair_logits.data(), fb.pair_logits.data(),
                        sizeof(double) * fa.pair_logits.size()) != 0) {
            ok = false;
            detail = "identity surgery changed logits";
        }
    }
    report(3, "embedding surgery conservation", ok, detail);
}

void criterion_4_gradient_correctness() {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;

    model::ModelConfig config;
    config.layers = 2;
    config.hidden = 16;
    config.heads = 2;
    config.max_seq_len = 8;
    config.vocab_size = 24;
    config.ffn_multiplier = 4;
    config.dropout_rate = 0.0;

    auto params = model::init_params(config, 17);
    auto batch = make_batch(config, 18, true);
    auto analytic =
        model::loss_and_grads(params, config, batch, model::Objective::MLM_NSP);

    auto tensors = params.tensors();
    auto grads = analytic.grads.tensors();
    const double h = 1e-5;
    int64_t checked = 0;
    double worst = 0.0;
    for (size_t ti = 0; ok && ti < tensors.size(); ++ti) {
        model::Matrix& tensor = *tensors[ti];
        const model::Matrix& grad = *grads[ti];
        for (Eigen::Index idx = 0; idx < tensor.size(); ++idx) {
            double saved = tensor.data()[idx];
            tensor.data()[idx] = saved + h;
            double lp = model::loss_and_grads(params, config, batch,
                                              model::Objective::MLM_NSP)
                            .loss;
            tensor.data()[idx] = saved - h;
            double lm = model::loss_and_grads(params, config, batch,
                                              model::Objective::MLM_NSP)
                            .loss;
            tensor.data()[idx] = saved;
            double numeric = (lp - lm) / (2 * h);
            double a = grad.data()[idx];
            double err = std::abs(numeric - a);
            double tol = 1e-3 * std::max({std::abs(numeric), std::abs(a), 1e-4});
            worst = std::max(worst, err / std::max({std::abs(numeric),
                                                    std::abs(a), 1e-4}));
            ++checked;
            if (err > tol) {
                ok = false;
                detail = "tensor " + std::to_string(ti) + " idx " +
                         std::to_string(idx) + ": analytic " + std::to_string(a) +
                         " vs numeric " + std::to_string(numeric);
                break;
            }
        }
    }
    double secs = seconds_since(t0);
    if (ok && secs >= 120.0) {
        ok = false;
        detail = "too slow: " + std::to_string(secs) + "s";
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%lld coords, worst rel err %.2e, %.1fs",
                  static_cast<long long>(checked), worst, secs);
    report(4, "analytic gradients vs central finite differences", ok,
           ok ? std::string(buf) : detail);
}

void criterion_5_perplexity_law() {
    bool ok = true;
    std::string detail;

    // Hand case: p = (1/2, 1/4, 1/8) -> PP = 4.0 within 1e-9.
    double pp_hand = evaluation::perplexity_from_log_probs(
        {std::log(0.5), std::log(0.25), std::log(0.125)});
    if (std::abs(pp_hand - 4.0) > 1e-9 * 4.0) {
        ok = false;
        detail = "hand case gave " + std::to_string(pp_hand);
    }

    // Uniform model over V gives PP = V.
    for (int v : {2, 50, 30000}) {
        std::vector<double> lp(100, std::log(1.0 / v));
        double pp = evaluation::perplexity_from_log_probs(lp);
        if (std::abs(pp - v) > 1e-9 * v) {
            ok = false;
            detail = "uniform V=" + std::to_string(v) + " gave " +
                     std::to_string(pp);
        }
    }

    // Identity PP == exp(mean masked NLL) on a real model report.
    if (ok) {
        auto config = model::ModelConfig::tiny_preset(40, 12);
        config.layers = 1;
        config.hidden = 16;
        config.dropout_rate = 0.0;
        auto params = model::init_params(config, 23);
        auto rep = evaluation::evaluate(params, config,
                                        {make_batch(config, 24, false, 3, 8)},
                                        model::Objective::MLM);
        if (std::abs(rep.perplexity - std::exp(rep.mlm_loss_nats)) >
            1e-6 * rep.perplexity) {
            ok = false;
            detail = "exp identity violated";
        }
    }
    report(5, "perplexity laws (hand case, uniform, exp identity)", ok, detail);
}

// Criteria 6 and 7 share one experiment run.
void criteria_6_7_directional(const std::string& out_dir) {
    auto t0 = std::chrono::steady_clock::now();
    bool ok6 = true, ok7 = true;
    std::string d6, d7;
    try {
        experiment::ExperimentConfig config;  // defaults match the spec setup
        auto result = experiment::reproduce_experiment(config, out_dir);
        const auto& scratch = result.regimes.at("from-scratch").median;
        const auto& bi = result.regimes.at("bilingual").median;
        const auto& multi = result.regimes.at("multilingual").median;

        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "median MLM acc: bilingual %.3f, from-scratch %.3f, "
                      "multilingual %.3f",
                      bi.mlm_accuracy, scratch.mlm_accuracy, multi.mlm_accuracy);
        d6 = buf;
        if (!(bi.mlm_accuracy > scratch.mlm_accuracy &&
              bi.mlm_accuracy >= multi.mlm_accuracy &&
              bi.mlm_accuracy - scratch.mlm_accuracy >= 0.02))
            ok6 = false;

        std::snprintf(buf, sizeof(buf),
                      "median valid PP: bilingual %.3f, from-scratch %.3f",
                      bi.perplexity, scratch.perplexity);
        d7 = buf;
        if (!(bi.perplexity < scratch.perplexity)) ok7 = false;

        double secs = seconds_since(t0);
        if (secs >= 900.0) {
            ok6 = false;
            d6 += " (too slow: " + std::to_string(secs) + "s)";
        }
        d6 += ", " + std::to_string(static_cast<int>(secs)) + "s";
    } catch (const std::exception& e) {
        ok6 = ok7 = false;
        d6 = d7 = std::string("experiment failed: ") + e.what();
    }
    report(6, "directional Table 2 (MLM accuracy ordering at desk scale)", ok6,
           d6);
    report(7, "directional Table 3 (bilingual PP < from-scratch PP)", ok7, d7);
}

void criterion_8_base_param_count() {
    int64_t n = model::param_count(model::ModelConfig::base_preset(30000));
    double rel = std::abs(static_cast<double>(n) - 110e6) / 110e6;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%lld params, %.1f%% from 110M",
                  static_cast<long long>(n), rel * 100.0);
    report(8, "BASE preset parameter count within 5% of 110M", rel <= 0.05, buf);
}

void criterion_9_tokenizer_round_trip() {
    bool ok = true;
    std::string detail;
    auto model = bpe::train_bpe(
        {"salam dunya yahan", "roman urdu aur english", "mix kar ke likhte"},
        400);
    std::mt19937_64 rng(0xACCE5509ull);
    std::uniform_int_distribution<int> len(1, 24);
    std::uniform_int_distribution<uint32_t> plane(0, 0x10FFFF);
    std::uniform_int_distribution<int> kind(0, 9);
    for (int trial = 0; ok && trial < 10000; ++trial) {
        std::vector<uint32_t> cps;
        int n = len(rng);
        for (int i = 0; i < n; ++i) {
            uint32_t cp;
            switch (kind(rng)) {
                case 0: cp = ' '; break;                      // whitespace runs
                case 1: cp = 'a' + (plane(rng) % 26); break;  // ascii
                case 2: cp = 'A' + (plane(rng) % 26); break;  // case folding
                case 3: cp = 0x600 + (plane(rng) % 0xFF); break;  // arabic block
                default:
                    do {
                        cp = plane(rng);
                    } while ((cp >= 0xD800 && cp <= 0xDFFF) || cp == 0);
                    break;
            }
            cps.push_back(cp);
        }
        std::string s = text::encode_utf8(cps);
        std::string round = model.decode(model.encode(s));
        if (round != text::casefold(s)) {
            ok = false;
            detail = "mismatch at trial " + std::to_string(trial);
        }
    }
    report(9, "tokenizer round trip equals casefold (10k random strings)", ok,
           detail);
}

void criterion_10_pipeline_determinism(const std::string& out_base) {
    bool ok = true;
    std::string detail;
    try {
        experiment::ExperimentConfig config;
        config.sentences = 1500;
        config.vocab_size = 320;
        config.steps = 20;
        config.base_steps = 20;
        config.seeds = {1};
        config.eval_every = 10;
        config.batch_size = 8;
        config.seq_len = 24;
        config.distractor_languages = 2;
        config.arch = model::ModelConfig::tiny_preset(320, 24);
        config.arch.layers = 1;
        config.arch.hidden = 32;

        auto r1 = experiment::reproduce_experiment(config, out_base + "/run1");
        auto r2 = experiment::reproduce_experiment(config, out_base + "/run2");
        if (r1.metrics_log_paths.size() != r2.metrics_log_paths.size()) {
            ok = false;
            detail = "different artifact counts";
        }
        for (size_t i = 0; ok && i < r1.metrics_log_paths.size(); ++i) {
            if (read_file(r1.metrics_log_paths[i]) !=
                read_file(r2.metrics_log_paths[i])) {
                ok = false;
                detail = "metrics differ: " + r1.metrics_log_paths[i];
            }
        }
    } catch (const std::exception& e) {
        ok = false;
        detail = std::string("experiment failed: ") + e.what();
    }
    report(10, "byte-identical metrics logs across two reproduce runs", ok,
           detail);
}

}  // namespace

int main() {
    auto out_root = fs::temp_directory_path() / "blm_acceptance_runs";
    fs::remove_all(out_root);
    fs::create_directories(out_root);

    criterion_1_augmentation_exactness();
    criterion_2_id_preservation();
    criterion_3_surgery_conservation();
    criterion_4_gradient_correctness();
    criterion_5_perplexity_law();
    criteria_6_7_directional((out_root / "experiment").string());
    criterion_8_base_param_count();
    criterion_9_tokenizer_round_trip();
    criterion_10_pipeline_determinism((out_root / "determinism").string());

    if (g_failures == 0) {
        std::printf("all 10 acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d criteria failed\n", g_failures);
    return 1;
}
