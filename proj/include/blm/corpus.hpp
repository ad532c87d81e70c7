#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace blm::corpus {

struct Document {
    std::vector<std::string> sentences;
};

struct CorpusStats {
    int64_t sentence_count = 0;
    int64_t word_count = 0;
};

struct Corpus {
    std::vector<Document> documents;
    std::string source_tag;

    CorpusStats stats() const;
    std::vector<std::string> all_sentences() const;
    bool empty() const { return documents.empty(); }
};

// Cleans raw text into sentences: NFC composition, URL / @mention / control
// character removal, hashtag marker stripped, whitespace collapsed, sentence
// split on . ! ? ؟ ۔ followed by space or end. Sentences with fewer than two
// words are dropped.
std::vector<std::string> clean(std::string_view raw);

struct TransliterationRule {
    std::string source;  // grapheme cluster, non-empty
    std::string target;
};

class TransliterationTable {
public:
    TransliterationTable() = default;
    explicit TransliterationTable(std::vector<TransliterationRule> rules);

    static TransliterationTable load(const std::string& path);  // TSV, '#' comments

    const std::vector<TransliterationRule>& rules() const { return rules_; }

private:
    std::vector<TransliterationRule> rules_;  // sorted longest source first
};

struct TransliterationResult {
    std::string text;
    double coverage = 1.0;  // fraction of source-script characters consumed
};

// Greedy longest-match-first left-to-right replacement. Characters without a
// rule pass through unchanged and lower the coverage metric when they belong
// to the source script (any codepoint that appears in a rule source).
TransliterationResult transliterate(std::string_view text,
                                    const TransliterationTable& table);

// Pluggable transliterator: the default is the local rule table; an HTTP
// client implementation can stand in for an external service.
class Transliterator {
public:
    virtual ~Transliterator() = default;
    virtual TransliterationResult run(std::string_view text) = 0;
};

class TableTransliterator : public Transliterator {
public:
    explicit TableTransliterator(TransliterationTable table)
        : table_(std::move(table)) {}
    TransliterationResult run(std::string_view text) override {
        return transliterate(text, table_);
    }

private:
    TransliterationTable table_;
};

// Deterministic sentence-hash split. The partition is exact: every sentence
// lands in exactly one side, document structure is preserved (documents with
// no sentences on a side are dropped from that side).
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus,
                                       double valid_fraction, uint64_t seed);

// One sentence per line, blank line between documents, UTF-8, LF endings.
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

}  // namespace blm::corpus
