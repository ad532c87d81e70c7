#include "blm/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace blm::training {

Regime regime_from_string(const std::string& s) {
    if (s == "from-scratch") return Regime::FromScratch;
    if (s == "bilingual") return Regime::ContinuedBilingual;
    if (s == "multilingual") return Regime::ContinuedMultilingual;
    throw std::runtime_error("unknown regime: " + s);
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::FromScratch: return "from-scratch";
        case Regime::ContinuedBilingual: return "bilingual";
        case Regime::ContinuedMultilingual: return "multilingual";
    }
    return "?";
}

void TrainingConfig::validate() const {
    if (steps < 1) throw std::runtime_error("training config: steps must be >= 1");
    if (!(mask_rate > 0.0 && mask_rate < 1.0))
        throw std::runtime_error("training config: mask_rate must be in (0,1)");
    if (batch_size < 1)
        throw std::runtime_error("training config: batch_size must be >= 1");
    if (seq_len < 4)
        throw std::runtime_error("training config: seq_len must be >= 4");
    if (lr <= 0.0) throw std::runtime_error("training config: lr must be positive");
    if (eval_every < 1)
        throw std::runtime_error("training config: eval_every must be >= 1");
}

std::string MetricsLog::to_jsonl() const {
    std::ostringstream out;
    size_t e = 0;
    for (const auto& s : steps) {
        nlohmann::json j = {{"step", s.step}, {"loss", s.loss}};
        out << j.dump() << '\n';
        while (e < evals.size() && evals[e].step == s.step) {
            nlohmann::json je = {
                {"step", evals[e].step},
                {"eval", nlohmann::json::parse(evals[e].report.to_json())}};
            out << je.dump() << '\n';
            ++e;
        }
    }
    for (; e < evals.size(); ++e) {
        nlohmann::json je = {{"step", evals[e].step},
                             {"eval", nlohmann::json::parse(evals[e].report.to_json())}};
        out << je.dump() << '\n';
    }
    return out.str();
}

void MetricsLog::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << to_jsonl();
}

std::vector<SentencePair> make_sentence_pairs(const corpus::Corpus& corpus,
                                              model::Objective objective,
                                              uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<SentencePair> out;
    if (!model::has_pair_task(objective)) {
        for (const auto& sent : corpus.all_sentences())
            out.push_back({sent, "", -1});
        return out;
    }
    const auto& docs = corpus.documents;
    bool nsp = objective == model::Objective::MLM_NSP;
    if (nsp && docs.size() < 2) throw std::runtime_error("need >=2 documents");
    std::bernoulli_distribution negative(0.5);
    for (size_t d = 0; d < docs.size(); ++d) {
        const auto& sents = docs[d].sentences;
        for (size_t i = 0; i + 1 < sents.size(); ++i) {
            SentencePair p;
            p.first = sents[i];
            if (negative(rng)) {
                if (nsp) {
                    // Random sentence from another document.
                    std::uniform_int_distribution<size_t> pick_doc(0, docs.size() - 2);
                    size_t od = pick_doc(rng);
                    if (od >= d) ++od;
                    const auto& other = docs[od].sentences;
                    std::uniform_int_distribution<size_t> pick(0, other.size() - 1);
                    p.second = other[pick(rng)];
                } else {  // SOP: same pair, swapped
                    p.first = sents[i + 1];
                    p.second = sents[i];
                }
                p.label = 0;
            } else {
                p.second = sents[i + 1];
                p.label = 1;
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

model::MaskedBatch prepare_mlm_batch(const std::vector<SentencePair>& items,
                                     const bpe::BpeModel& bpe_model, int seq_len,
                                     double mask_rate, bool pair_task,
                                     std::mt19937_64& rng) {
    struct Encoded {
        std::vector<int> a, b;
        int label;
    };
    std::vector<Encoded> encoded;
    for (const auto& item : items) {
        Encoded e;
        e.a = bpe_model.encode(item.first);
        e.b = bpe_model.encode(item.second);
        e.label = item.label;
        if (e.a.empty() && e.b.empty()) continue;  // skip empty after tokenization
        // Truncate longest-first until the packed sequence fits.
        int budget = seq_len - 2 - (e.b.empty() ? 0 : 1);
        while (static_cast<int>(e.a.size() + e.b.size()) > budget) {
            if (e.a.size() >= e.b.size())
                e.a.pop_back();
            else
                e.b.pop_back();
        }
        if (e.a.empty() && e.b.empty()) continue;
        encoded.push_back(std::move(e));
    }
    if (encoded.empty()) throw std::runtime_error("no usable sentences in batch");

    model::MaskedBatch batch;
    batch.batch = static_cast<int>(encoded.size());
    batch.seq = seq_len;
    size_t n = static_cast<size_t>(batch.batch) * seq_len;
    batch.input_ids.assign(n, bpe::kPadId);
    batch.attention_mask.assign(n, 0);
    batch.segment_ids.assign(n, 0);
    batch.mlm_labels.assign(n, model::kNoLabel);
    if (pair_task) batch.pair_labels.resize(batch.batch);

    const int vocab = static_cast<int>(bpe_model.vocab().size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> random_token(0, vocab - 1);

    for (int b = 0; b < batch.batch; ++b) {
        const Encoded& e = encoded[b];
        std::vector<int> ids;
        std::vector<uint8_t> segs;
        ids.push_back(bpe::kClsId);
        segs.push_back(0);
        for (int id : e.a) {
            ids.push_back(id);
            segs.push_back(0);
        }
        ids.push_back(bpe::kSepId);
        segs.push_back(0);
        if (!e.b.empty()) {
            for (int id : e.b) {
                ids.push_back(id);
                segs.push_back(1);
            }
            ids.push_back(bpe::kSepId);
            segs.push_back(1);
        }
        for (size_t t = 0; t < ids.size(); ++t) {
            int r = batch.at(b, static_cast<int>(t));
            batch.attention_mask[r] = 1;
            batch.segment_ids[r] = segs[t];
            int id = ids[t];
            bool special = id < static_cast<int>(bpe::default_special_tokens().size());
            if (!special && unit(rng) < mask_rate) {
                batch.mlm_labels[r] = id;
                double branch = unit(rng);
                if (branch < 0.8)
                    batch.input_ids[r] = bpe::kMaskId;
                else if (branch < 0.9)
                    batch.input_ids[r] = random_token(rng);
                else
                    batch.input_ids[r] = id;  // keep
            } else {
                batch.input_ids[r] = id;
            }
        }
        if (pair_task) {
            if (e.label != 0 && e.label != 1)
                throw std::runtime_error("pair task requires labeled pairs");
            batch.pair_labels[b] = e.label;
        }
    }
    return batch;
}

namespace {

std::vector<model::MaskedBatch> build_eval_batches(
    const corpus::Corpus& valid, const bpe::BpeModel& bpe_model,
    const TrainingConfig& cfg) {
    std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
    auto pairs = make_sentence_pairs(valid, cfg.objective, cfg.seed ^ 0xA5A5A5A5ull);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const size_t max_items = 512;
    if (pairs.size() > max_items) pairs.resize(max_items);
    std::vector<model::MaskedBatch> batches;
    for (size_t i = 0; i < pairs.size(); i += cfg.batch_size) {
        std::vector<SentencePair> slice(
            pairs.begin() + i,
            pairs.begin() + std::min(pairs.size(), i + cfg.batch_size));
        batches.push_back(prepare_mlm_batch(slice, bpe_model, cfg.seq_len,
                                            cfg.mask_rate,
                                            model::has_pair_task(cfg.objective),
                                            rng));
    }
    return batches;
}

}  // namespace

PretrainResult run_pretraining(const PretrainData& data,
                               const TrainingConfig& config,
                               const model::ModelConfig& arch,
                               const model::Checkpoint* base,
                               const augment::AugmentationMap* map) {
    config.validate();
    if (!data.train || data.train->empty())
        throw std::runtime_error("empty training corpus");
    if (!data.tokenizer) throw std::runtime_error("missing tokenizer");

    bool continued = config.regime != Regime::FromScratch;
    if (continued && !base)
        throw std::runtime_error(to_string(config.regime) +
                                 " regime requires a base checkpoint");
    if (!continued && base)
        throw std::runtime_error("from-scratch regime forbids a base checkpoint");
    if (config.regime == Regime::ContinuedBilingual && !map)
        throw std::runtime_error("bilingual regime requires an augmentation map");

    model::ModelConfig cfg = arch;
    model::ModelParams params;
    if (continued) {
        if (map) {
            for (const auto& e : map->entries)
                if (e.origin != augment::Origin::NewFromX &&
                    e.new_id >= base->config.vocab_size)
                    throw std::runtime_error(
                        "vocab/checkpoint mismatch: map id exceeds base vocab");
            if (static_cast<int>(map->entries.size()) !=
                static_cast<int>(data.tokenizer->vocab().size()))
                throw std::runtime_error(
                    "vocab/checkpoint mismatch: map size differs from tokenizer vocab");
            cfg = base->config;
            params = augment::embedding_surgery(base->params, base->config, *map,
                                                augment::InitPolicy::Gaussian,
                                                config.seed, &cfg);
        } else {
            if (base->config.vocab_size !=
                static_cast<int>(data.tokenizer->vocab().size()))
                throw std::runtime_error(
                    "vocab/checkpoint mismatch: tokenizer vocab differs from base");
            cfg = base->config;
            params = base->params;
        }
    } else {
        cfg.vocab_size = static_cast<int>(data.tokenizer->vocab().size());
        cfg.validate();
        params = model::init_params(cfg, config.seed);
    }
    if (config.seq_len > cfg.max_seq_len)
        throw std::runtime_error("training seq_len exceeds model max_seq_len");

    std::vector<model::MaskedBatch> eval_batches;
    if (data.valid && !data.valid->empty())
        eval_batches = build_eval_batches(*data.valid, *data.tokenizer, config);

    auto pairs = make_sentence_pairs(*data.train, config.objective, config.seed);
    if (pairs.empty()) throw std::runtime_error("training corpus yields no items");

    std::mt19937_64 data_rng(config.seed ^ 0xC0FFEEull);
    std::mt19937_64 mask_rng(config.seed ^ 0xBADC0DEull);
    std::shuffle(pairs.begin(), pairs.end(), data_rng);

    model::AdamState adam = model::AdamState::zeros_like(params);
    MetricsLog log;
    size_t cursor = 0;
    bool pair_task = model::has_pair_task(config.objective);
    for (int64_t step = 1; step <= config.steps; ++step) {
        std::vector<SentencePair> slice;
        while (static_cast<int>(slice.size()) < config.batch_size) {
            if (cursor == pairs.size()) {
                cursor = 0;
                std::shuffle(pairs.begin(), pairs.end(), data_rng);
            }
            slice.push_back(pairs[cursor++]);
        }
        model::MaskedBatch batch = prepare_mlm_batch(
            slice, *data.tokenizer, config.seq_len, config.mask_rate, pair_task,
            mask_rng);
        std::optional<uint64_t> drop_seed;
        if (cfg.dropout_rate > 0.0)
            drop_seed = config.seed ^ (0xD12Full + static_cast<uint64_t>(step));
        model::LossGrads lg =
            model::loss_and_grads(params, cfg, batch, config.objective, drop_seed);
        model::adam_step(params, lg.grads, adam, config.lr, step);
        log.steps.push_back({step, lg.loss});
        if (!eval_batches.empty() &&
            (step % config.eval_every == 0 || step == config.steps)) {
            log.evals.push_back(
                {step, evaluation::evaluate(params, cfg, eval_batches,
                                            config.objective)});
        }
    }
    return {std::move(params), cfg, std::move(log)};
}

// ---------------------------------------------------------------------------
// Synthetic bilingual corpus
// ---------------------------------------------------------------------------

namespace {

struct Lexicon {
    std::vector<std::string> det, adj, noun, verb, adv;
    // collocations: noun -> allowed adjective indices, verb -> adverb indices
    std::vector<std::vector<int>> noun_adj;
    std::vector<std::vector<int>> verb_adv;
};

constexpr int kDet = 4, kAdj = 18, kNoun = 30, kVerb = 18, kAdv = 10;

std::string make_word(const std::vector<std::string>& consonants,
                      const std::vector<std::string>& vowels, int syllables,
                      std::mt19937_64& rng) {
    std::uniform_int_distribution<size_t> pick_c(0, consonants.size() - 1);
    std::uniform_int_distribution<size_t> pick_v(0, vowels.size() - 1);
    std::string w;
    for (int s = 0; s < syllables; ++s) w += consonants[pick_c(rng)] + vowels[pick_v(rng)];
    return w;
}

std::vector<std::string> make_words(int count,
                                    const std::vector<std::string>& consonants,
                                    const std::vector<std::string>& vowels,
                                    std::mt19937_64& rng,
                                    std::set<std::string>& used) {
    std::uniform_int_distribution<int> syl(2, 3);
    std::vector<std::string> out;
    while (static_cast<int>(out.size()) < count) {
        std::string w = make_word(consonants, vowels, syl(rng), rng);
        if (used.insert(w).second) out.push_back(w);
    }
    return out;
}

void attach_collocations(Lexicon& lex, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick_adj(0, kAdj - 1);
    std::uniform_int_distribution<int> pick_adv(0, kAdv - 1);
    lex.noun_adj.assign(kNoun, {});
    for (auto& allowed : lex.noun_adj)
        for (int k = 0; k < 3; ++k) allowed.push_back(pick_adj(rng));
    lex.verb_adv.assign(kVerb, {});
    for (auto& allowed : lex.verb_adv)
        for (int k = 0; k < 2; ++k) allowed.push_back(pick_adv(rng));
}

struct Alphabet {
    std::vector<std::string> consonants, vowels;
};

Alphabet alphabet_for(int index) {
    switch (index) {
        case 0: return {{"k", "t", "m", "s", "n", "r", "l", "p"},
                        {"a", "i", "o", "u"}};
        case 1: return {{"b", "d", "g", "v", "z", "f", "j", "w"}, {"e", "y"}};
        default: {
            // Distractor languages: digraph onsets keyed by index so their
            // words never collide with the hi/lo inventories.
            std::string tag = std::to_string(index);
            return {{"ch" + tag, "qu" + tag, "x" + tag, "h" + tag, "cc" + tag},
                    {"a", "e", "o"}};
        }
    }
}

Lexicon make_lexicon(const Alphabet& alpha, std::mt19937_64& rng,
                     std::set<std::string>& used) {
    Lexicon lex;
    lex.det = make_words(kDet, alpha.consonants, alpha.vowels, rng, used);
    lex.adj = make_words(kAdj, alpha.consonants, alpha.vowels, rng, used);
    lex.noun = make_words(kNoun, alpha.consonants, alpha.vowels, rng, used);
    lex.verb = make_words(kVerb, alpha.consonants, alpha.vowels, rng, used);
    lex.adv = make_words(kAdv, alpha.consonants, alpha.vowels, rng, used);
    attach_collocations(lex, rng);
    return lex;
}

// Replaces a fraction of each word class with words from `donor` at matching
// indices (collocation structure carries over, so shared words keep their
// syntactic role).
void share_types(Lexicon& lex, const Lexicon& donor, double fraction,
                 std::mt19937_64& rng) {
    auto share = [&](std::vector<std::string>& mine,
                     const std::vector<std::string>& theirs) {
        int n = static_cast<int>(mine.size());
        int k = static_cast<int>(std::lround(fraction * n));
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int i = 0; i < k; ++i) mine[idx[i]] = theirs[idx[i]];
    };
    share(lex.det, donor.det);
    share(lex.adj, donor.adj);
    share(lex.noun, donor.noun);
    share(lex.verb, donor.verb);
    share(lex.adv, donor.adv);
}

// Zipf-ish sampling over a class restricted to a topic subset.
int zipf_pick(const std::vector<int>& candidates, std::mt19937_64& rng) {
    std::vector<double> w(candidates.size());
    double total = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
        w[i] = 1.0 / static_cast<double>(i + 1);
        total += w[i];
    }
    std::uniform_real_distribution<double> unit(0.0, total);
    double x = unit(rng);
    for (size_t i = 0; i < w.size(); ++i) {
        x -= w[i];
        if (x <= 0.0) return candidates[i];
    }
    return candidates.back();
}

corpus::Corpus generate_corpus(const Lexicon& lex, int64_t sentences,
                               std::mt19937_64& rng, const std::string& tag) {
    corpus::Corpus out;
    out.source_tag = tag;
    const int doc_len = 20;
    std::uniform_int_distribution<int> pick_det(0, kDet - 1);
    std::uniform_int_distribution<int> pick_template(0, 3);
    std::uniform_int_distribution<size_t> pick_member(0, 100000);

    int64_t produced = 0;
    while (produced < sentences) {
        // Each document sticks to a small topic: a noun/verb subset, so that
        // consecutive sentences are related and NSP negatives are detectable.
        std::vector<int> topic_nouns, topic_verbs;
        {
            std::vector<int> all_n(kNoun), all_v(kVerb);
            std::iota(all_n.begin(), all_n.end(), 0);
            std::iota(all_v.begin(), all_v.end(), 0);
            std::shuffle(all_n.begin(), all_n.end(), rng);
            std::shuffle(all_v.begin(), all_v.end(), rng);
            topic_nouns.assign(all_n.begin(), all_n.begin() + 6);
            topic_verbs.assign(all_v.begin(), all_v.begin() + 5);
        }
        corpus::Document doc;
        for (int s = 0; s < doc_len && produced < sentences; ++s, ++produced) {
            int n1 = zipf_pick(topic_nouns, rng);
            int v1 = zipf_pick(topic_verbs, rng);
            const auto& adjs = lex.noun_adj[n1];
            int a1 = adjs[pick_member(rng) % adjs.size()];
            const auto& advs = lex.verb_adv[v1];
            int d1 = advs[pick_member(rng) % advs.size()];
            std::string sent;
            switch (pick_template(rng)) {
                case 0:
                    sent = lex.det[pick_det(rng)] + " " + lex.adj[a1] + " " +
                           lex.noun[n1] + " " + lex.verb[v1] + " " + lex.adv[d1];
                    break;
                case 1: {
                    int n2 = zipf_pick(topic_nouns, rng);
                    const auto& adjs2 = lex.noun_adj[n2];
                    int a2 = adjs2[pick_member(rng) % adjs2.size()];
                    sent = lex.det[pick_det(rng)] + " " + lex.noun[n1] + " " +
                           lex.verb[v1] + " " + lex.det[pick_det(rng)] + " " +
                           lex.adj[a2] + " " + lex.noun[n2];
                    break;
                }
                case 2:
                    sent = lex.noun[n1] + " " + lex.verb[v1] + " " + lex.adv[d1];
                    break;
                default: {
                    int n2 = zipf_pick(topic_nouns, rng);
                    sent = lex.det[pick_det(rng)] + " " + lex.adj[a1] + " " +
                           lex.noun[n1] + " " + lex.verb[v1] + " " +
                           lex.det[pick_det(rng)] + " " + lex.noun[n2];
                    break;
                }
            }
            doc.sentences.push_back(std::move(sent));
        }
        out.documents.push_back(std::move(doc));
    }
    return out;
}

}  // namespace

std::pair<corpus::Corpus, corpus::Corpus> synth_bilingual_corpus(
    double shared_fraction, int64_t sentences, uint64_t seed) {
    if (!(shared_fraction >= 0.0 && shared_fraction <= 1.0))
        throw std::runtime_error("shared_fraction must be in [0,1]");
    std::mt19937_64 rng(seed);
    std::set<std::string> used;
    Lexicon hi = make_lexicon(alphabet_for(0), rng, used);
    Lexicon lo = make_lexicon(alphabet_for(1), rng, used);
    share_types(lo, hi, shared_fraction, rng);
    std::mt19937_64 rng_hi(seed ^ 0x1111ull), rng_lo(seed ^ 0x2222ull);
    corpus::Corpus chi = generate_corpus(hi, sentences, rng_hi, "synth:hi");
    corpus::Corpus clo = generate_corpus(lo, sentences, rng_lo, "synth:lo");
    return {std::move(chi), std::move(clo)};
}

corpus::Corpus synth_distractor_corpus(int index, int64_t sentences,
                                       uint64_t seed) {
    if (index < 2) throw std::runtime_error("distractor index starts at 2");
    std::mt19937_64 rng(seed ^ (0x3333ull * static_cast<uint64_t>(index)));
    std::set<std::string> used;
    Lexicon lex = make_lexicon(alphabet_for(index), rng, used);
    std::mt19937_64 rng_gen(seed ^ (0x4444ull * static_cast<uint64_t>(index)));
    return generate_corpus(lex, sentences, rng_gen,
                           "synth:distractor" + std::to_string(index));
}

}  // namespace blm::training
