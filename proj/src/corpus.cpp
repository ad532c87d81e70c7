#include "blm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "blm/text.hpp"

namespace blm::corpus {

CorpusStats Corpus::stats() const {
    CorpusStats s;
    for (const auto& doc : documents) {
        s.sentence_count += static_cast<int64_t>(doc.sentences.size());
        for (const auto& sent : doc.sentences) {
            bool in_word = false;
            for (char c : sent) {
                bool ws = text::is_ascii_space(c);
                if (!ws && !in_word) ++s.word_count;
                in_word = !ws;
            }
        }
    }
    return s;
}

std::vector<std::string> Corpus::all_sentences() const {
    std::vector<std::string> out;
    for (const auto& doc : documents)
        out.insert(out.end(), doc.sentences.begin(), doc.sentences.end());
    return out;
}

namespace {

bool is_url_start(const std::vector<uint32_t>& cps, size_t i) {
    auto match = [&](const char* prefix) {
        for (size_t k = 0; prefix[k]; ++k)
            if (i + k >= cps.size() || cps[i + k] != static_cast<uint32_t>(prefix[k]))
                return false;
        return true;
    };
    return match("http://") || match("https://") || match("www.");
}

bool is_word_cp(uint32_t cp) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') ||
           (cp >= '0' && cp <= '9') || cp == '_';
}

bool cp_is_space(uint32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' ||
           cp == '\v';
}

bool is_control(uint32_t cp) {
    return (cp < 0x20 && !cp_is_space(cp)) || cp == 0x7F ||
           (cp >= 0x80 && cp <= 0x9F);
}

bool is_sentence_end(uint32_t cp) {
    return cp == '.' || cp == '!' || cp == '?' || cp == 0x061F /* ؟ */ ||
           cp == 0x06D4 /* ۔ */;
}

int word_count_of(const std::string& s) {
    int n = 0;
    bool in_word = false;
    for (char c : s) {
        bool ws = text::is_ascii_space(c);
        if (!ws && !in_word) ++n;
        in_word = !ws;
    }
    return n;
}

}  // namespace

std::vector<std::string> clean(std::string_view raw) {
    std::vector<uint32_t> cps = text::to_codepoints(text::compose_nfc(raw));

    // Strip URLs, @mentions, hashtag markers and control characters.
    std::vector<uint32_t> kept;
    kept.reserve(cps.size());
    for (size_t i = 0; i < cps.size();) {
        if (is_url_start(cps, i)) {
            while (i < cps.size() && !cp_is_space(cps[i])) ++i;
            continue;
        }
        if (cps[i] == '@' && i + 1 < cps.size() && is_word_cp(cps[i + 1])) {
            ++i;
            while (i < cps.size() && is_word_cp(cps[i])) ++i;
            continue;
        }
        if (cps[i] == '#') {
            ++i;  // keep the word, drop the marker
            continue;
        }
        if (is_control(cps[i])) {
            kept.push_back(' ');
            ++i;
            continue;
        }
        kept.push_back(cps[i]);
        ++i;
    }

    // Collapse whitespace.
    std::vector<uint32_t> collapsed;
    collapsed.reserve(kept.size());
    for (uint32_t cp : kept) {
        if (cp_is_space(cp)) {
            if (!collapsed.empty() && collapsed.back() != ' ') collapsed.push_back(' ');
        } else {
            collapsed.push_back(cp);
        }
    }
    while (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();

    // Sentence split: terminator followed by space or end of text.
    std::vector<std::string> sentences;
    std::vector<uint32_t> cur;
    for (size_t i = 0; i < collapsed.size(); ++i) {
        cur.push_back(collapsed[i]);
        bool at_end = i + 1 == collapsed.size();
        if (is_sentence_end(collapsed[i]) && (at_end || collapsed[i + 1] == ' ')) {
            while (!cur.empty() && cur.front() == ' ') cur.erase(cur.begin());
            if (!cur.empty()) sentences.push_back(text::encode_utf8(cur));
            cur.clear();
        }
    }
    while (!cur.empty() && cur.front() == ' ') cur.erase(cur.begin());
    if (!cur.empty()) sentences.push_back(text::encode_utf8(cur));

    std::erase_if(sentences, [](const std::string& s) { return word_count_of(s) < 2; });
    return sentences;
}

TransliterationTable::TransliterationTable(std::vector<TransliterationRule> rules) {
    for (const auto& r : rules)
        if (r.source.empty())
            throw std::runtime_error("transliteration rule with empty source");
    for (size_t i = 0; i < rules.size(); ++i)
        for (size_t j = i + 1; j < rules.size(); ++j)
            if (rules[i].source == rules[j].source)
                throw std::runtime_error("duplicate transliteration source: " +
                                         rules[i].source);
    std::stable_sort(rules.begin(), rules.end(),
                     [](const TransliterationRule& a, const TransliterationRule& b) {
                         if (a.source.size() != b.source.size())
                             return a.source.size() > b.source.size();
                         return a.source < b.source;
                     });
    rules_ = std::move(rules);
}

TransliterationTable TransliterationTable::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<TransliterationRule> rules;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("malformed transliteration rule: " + line);
        rules.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return TransliterationTable(std::move(rules));
}

TransliterationResult transliterate(std::string_view input,
                                    const TransliterationTable& table) {
    // Source script = every codepoint used by any rule source.
    std::vector<uint32_t> source_cps;
    for (const auto& r : table.rules())
        for (uint32_t cp : text::to_codepoints(r.source)) source_cps.push_back(cp);
    auto in_source_script = [&](uint32_t cp) {
        return std::find(source_cps.begin(), source_cps.end(), cp) !=
               source_cps.end();
    };

    TransliterationResult result;
    int64_t consumed = 0, uncovered = 0;
    size_t i = 0;
    std::string s(input);
    while (i < s.size()) {
        bool matched = false;
        for (const auto& r : table.rules()) {  // longest sources first
            if (s.compare(i, r.source.size(), r.source) == 0) {
                result.text += r.target;
                consumed += static_cast<int64_t>(
                    text::to_codepoints(r.source).size());
                i += r.source.size();
                matched = true;
                break;
            }
        }
        if (matched) continue;
        auto [cp, len] = text::decode_utf8(s, i);
        if (in_source_script(cp)) ++uncovered;
        result.text.append(s, i, len);
        i += len;
    }
    int64_t total = consumed + uncovered;
    result.coverage = total == 0 ? 1.0
                                 : 1.0 - static_cast<double>(uncovered) /
                                             static_cast<double>(total);
    return result;
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus,
                                       double valid_fraction, uint64_t seed) {
    if (corpus.empty()) throw std::runtime_error("empty corpus");
    if (!(valid_fraction > 0.0 && valid_fraction < 1.0))
        throw std::runtime_error("valid fraction must be in (0,1)");
    const uint64_t bucket_count = 1000000;
    const auto threshold =
        static_cast<uint64_t>(valid_fraction * static_cast<double>(bucket_count));
    Corpus train, valid;
    train.source_tag = corpus.source_tag + ":train";
    valid.source_tag = corpus.source_tag + ":valid";
    for (const auto& doc : corpus.documents) {
        Document dt, dv;
        for (const auto& sent : doc.sentences) {
            uint64_t h = text::fnv1a64(sent, 1469598103934665603ull ^ seed);
            if (h % bucket_count < threshold)
                dv.sentences.push_back(sent);
            else
                dt.sentences.push_back(sent);
        }
        if (!dt.sentences.empty()) train.documents.push_back(std::move(dt));
        if (!dv.sentences.empty()) valid.documents.push_back(std::move(dv));
    }
    return {std::move(train), std::move(valid)};
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (size_t d = 0; d < corpus.documents.size(); ++d) {
        if (d > 0) out << '\n';
        for (const auto& sent : corpus.documents[d].sentences) out << sent << '\n';
    }
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    Corpus c;
    c.source_tag = path;
    Document cur;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            if (!cur.sentences.empty()) c.documents.push_back(std::move(cur));
            cur = Document{};
        } else {
            cur.sentences.push_back(line);
        }
    }
    if (!cur.sentences.empty()) c.documents.push_back(std::move(cur));
    return c;
}

}  // namespace blm::corpus
