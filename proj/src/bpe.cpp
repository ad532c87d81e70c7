#include "blm/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "blm/text.hpp"

namespace blm::bpe {

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
    index_.reserve(tokens_.size());
    for (size_t i = 0; i < tokens_.size(); ++i) {
        auto [it, inserted] = index_.emplace(tokens_[i], static_cast<int>(i));
        if (!inserted)
            throw std::runtime_error("duplicate token in vocabulary: " + tokens_[i]);
    }
}

int Vocabulary::id_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? -1 : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<size_t>(id) >= tokens_.size())
        throw std::runtime_error("unknown token id");
    return tokens_[static_cast<size_t>(id)];
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    // A trailing newline after the last token is part of the format; an
    // empty final line read as a token would be a stray blank.
    while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
    return Vocabulary(std::move(tokens));
}

namespace {

// GPT-2 style byte<->printable-codepoint bijection.
const std::vector<uint32_t>& byte_symbols() {
    static const std::vector<uint32_t> table = [] {
        std::vector<uint32_t> t(256, 0);
        std::vector<bool> direct(256, false);
        for (int b = '!'; b <= '~'; ++b) direct[b] = true;
        for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
        for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
        uint32_t next = 0x100;
        for (int b = 0; b < 256; ++b)
            t[b] = direct[b] ? static_cast<uint32_t>(b) : next++;
        return t;
    }();
    return table;
}

}  // namespace

std::string byte_to_symbol(unsigned char b) {
    std::string s;
    text::append_utf8(s, byte_symbols()[b]);
    return s;
}

const std::unordered_map<uint32_t, unsigned char>& symbol_to_byte() {
    static const std::unordered_map<uint32_t, unsigned char> table = [] {
        std::unordered_map<uint32_t, unsigned char> t;
        for (int b = 0; b < 256; ++b)
            t[byte_symbols()[b]] = static_cast<unsigned char>(b);
        return t;
    }();
    return table;
}

namespace {

// Splits into maximal runs of whitespace / non-whitespace bytes.
std::vector<std::string> split_runs(std::string_view s) {
    std::vector<std::string> runs;
    size_t i = 0;
    while (i < s.size()) {
        bool ws = text::is_ascii_space(s[i]);
        size_t j = i;
        while (j < s.size() && text::is_ascii_space(s[j]) == ws) ++j;
        runs.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return runs;
}

std::vector<std::string> bytes_to_symbols(std::string_view run) {
    std::vector<std::string> syms;
    syms.reserve(run.size());
    for (unsigned char b : run) syms.push_back(byte_to_symbol(b));
    return syms;
}

// Applies one merge rule everywhere in the symbol sequence, left to right.
void apply_merge(std::vector<std::string>& syms, const MergeRule& rule) {
    size_t w = 0;
    for (size_t r = 0; r < syms.size();) {
        if (r + 1 < syms.size() && syms[r] == rule.left && syms[r + 1] == rule.right) {
            syms[w++] = rule.left + rule.right;
            r += 2;
        } else {
            if (w != r) syms[w] = std::move(syms[r]);
            ++w;
            r += 1;
        }
    }
    syms.resize(w);
}

}  // namespace

BpeModel::BpeModel(std::vector<MergeRule> merges, Vocabulary vocab, bool uncased)
    : merges_(std::move(merges)), vocab_(std::move(vocab)), uncased_(uncased) {
    for (const auto& m : merges_) {
        if (!vocab_.contains(m.left + m.right))
            throw std::runtime_error("merge output not in vocabulary: " +
                                     m.left + m.right);
    }
}

BpeModel BpeModel::with_vocab(Vocabulary vocab) const {
    return BpeModel(merges_, std::move(vocab), uncased_);
}

std::vector<std::string> BpeModel::segment_word(const std::string& word) const {
    std::vector<std::string> syms = bytes_to_symbols(word);
    for (const auto& rule : merges_) {
        if (syms.size() < 2) break;
        apply_merge(syms, rule);
    }
    return syms;
}

std::vector<int> BpeModel::encode(std::string_view text_in) const {
    std::string folded = uncased_ ? text::casefold(text_in) : std::string(text_in);
    std::vector<int> ids;
    for (const std::string& run : split_runs(folded)) {
        {
            std::lock_guard<std::mutex> lock(cache_mutex_);
            auto it = word_cache_.find(run);
            if (it != word_cache_.end()) {
                ids.insert(ids.end(), it->second.begin(), it->second.end());
                continue;
            }
        }
        std::vector<int> word_ids;
        for (const std::string& sym : segment_word(run)) {
            int id = vocab_.id_of(sym);
            if (id < 0) {
                // Byte fallback: re-split the symbol into its bytes.
                auto cps = text::to_codepoints(sym);
                for (uint32_t cp : cps) {
                    auto it = symbol_to_byte().find(cp);
                    unsigned char b = it == symbol_to_byte().end() ? '?' : it->second;
                    int bid = vocab_.id_of(byte_to_symbol(b));
                    word_ids.push_back(bid >= 0 ? bid : kUnkId);
                }
            } else {
                word_ids.push_back(id);
            }
        }
        {
            std::lock_guard<std::mutex> lock(cache_mutex_);
            word_cache_.emplace(run, word_ids);
        }
        ids.insert(ids.end(), word_ids.begin(), word_ids.end());
    }
    return ids;
}

std::string BpeModel::decode(const std::vector<int>& ids) const {
    const auto& specials = default_special_tokens();
    std::string out;
    for (int id : ids) {
        const std::string& tok = vocab_.token(id);  // throws on bad id
        if (std::find(specials.begin(), specials.end(), tok) != specials.end()) {
            out += tok;
            continue;
        }
        for (uint32_t cp : text::to_codepoints(tok)) {
            auto it = symbol_to_byte().find(cp);
            if (it != symbol_to_byte().end())
                out.push_back(static_cast<char>(it->second));
            else
                text::append_utf8(out, cp);
        }
    }
    return out;
}

void BpeModel::save(const std::string& vocab_path,
                    const std::string& merges_path) const {
    vocab_.save(vocab_path);
    std::ofstream out(merges_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + merges_path);
    out << "#version 1\n";
    for (const auto& m : merges_) out << m.left << ' ' << m.right << '\n';
}

BpeModel BpeModel::load(const std::string& vocab_path,
                        const std::string& merges_path, bool uncased) {
    Vocabulary vocab = Vocabulary::load(vocab_path);
    std::ifstream in(merges_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + merges_path);
    std::string line;
    if (!std::getline(in, line) || line != "#version 1")
        throw std::runtime_error("bad merges file header");
    std::vector<MergeRule> merges;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t sp = line.find(' ');
        if (sp == std::string::npos)
            throw std::runtime_error("malformed merge line: " + line);
        merges.push_back({line.substr(0, sp), line.substr(sp + 1)});
    }
    return BpeModel(std::move(merges), std::move(vocab), uncased);
}

BpeModel train_bpe(const std::vector<std::string>& corpus, size_t vocab_size,
                   const std::vector<std::string>& special_tokens, bool uncased) {
    if (corpus.empty()) throw std::runtime_error("empty corpus");
    size_t alphabet = special_tokens.size() + 256;
    if (vocab_size < alphabet) throw std::runtime_error("vocab size below alphabet");

    // word (symbol sequence) -> frequency
    std::unordered_map<std::string, int64_t> word_freq;
    for (const std::string& sentence : corpus) {
        std::string folded = uncased ? text::casefold(sentence) : sentence;
        for (const std::string& run : split_runs(folded)) ++word_freq[run];
    }

    std::vector<std::pair<std::vector<std::string>, int64_t>> words;
    words.reserve(word_freq.size());
    {
        // Deterministic iteration order.
        std::map<std::string, int64_t> sorted(word_freq.begin(), word_freq.end());
        for (auto& [w, f] : sorted) words.emplace_back(bytes_to_symbols(w), f);
    }

    std::vector<std::string> tokens = special_tokens;
    for (int b = 0; b < 256; ++b) tokens.push_back(byte_to_symbol(b));
    std::unordered_map<std::string, bool> in_vocab;
    for (const auto& t : tokens) in_vocab[t] = true;

    std::vector<MergeRule> merges;
    while (tokens.size() < vocab_size) {
        std::map<std::pair<std::string, std::string>, int64_t> pair_freq;
        for (const auto& [syms, f] : words)
            for (size_t i = 0; i + 1 < syms.size(); ++i)
                pair_freq[{syms[i], syms[i + 1]}] += f;
        if (pair_freq.empty()) break;
        // Highest frequency, ties by lexicographic order of the pair (the
        // std::map already iterates in that order).
        auto best = pair_freq.begin();
        for (auto it = pair_freq.begin(); it != pair_freq.end(); ++it)
            if (it->second > best->second) best = it;
        MergeRule rule{best->first.first, best->first.second};
        merges.push_back(rule);
        for (auto& [syms, f] : words) apply_merge(syms, rule);
        std::string merged = rule.left + rule.right;
        if (!in_vocab[merged]) {
            in_vocab[merged] = true;
            tokens.push_back(merged);
        }
    }

    // Merges exhausted early: pad with unused byte-pair strings so the vocab
    // size contract holds exactly.
    for (int a = 0; a < 256 && tokens.size() < vocab_size; ++a) {
        for (int b = 0; b < 256 && tokens.size() < vocab_size; ++b) {
            std::string filler = byte_to_symbol(a) + byte_to_symbol(b);
            if (!in_vocab[filler]) {
                in_vocab[filler] = true;
                tokens.push_back(filler);
            }
        }
    }
    if (tokens.size() < vocab_size)
        throw std::runtime_error("vocab size unreachable");

    return BpeModel(std::move(merges), Vocabulary(std::move(tokens)), uncased);
}

}  // namespace blm::bpe
