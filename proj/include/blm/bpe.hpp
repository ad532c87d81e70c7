#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace blm::bpe {

inline const std::vector<std::string>& default_special_tokens() {
    static const std::vector<std::string> v = {"[PAD]", "[UNK]", "[CLS]",
                                              "[SEP]", "[MASK]"};
    return v;
}

constexpr int kPadId = 0;
constexpr int kUnkId = 1;
constexpr int kClsId = 2;
constexpr int kSepId = 3;
constexpr int kMaskId = 4;

// Ordered token list; id of a token is its zero-based position.
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> tokens);

    int id_of(std::string_view token) const;  // -1 when absent
    bool contains(std::string_view token) const { return id_of(token) >= 0; }
    const std::string& token(int id) const;
    size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

// Byte-level mapping: every byte gets a printable codepoint so vocab files
// stay one-token-per-line. Printable ASCII and most of Latin-1 map to
// themselves, the rest are relocated above U+0100.
std::string byte_to_symbol(unsigned char b);
const std::unordered_map<uint32_t, unsigned char>& symbol_to_byte();

struct MergeRule {
    std::string left;
    std::string right;
};

class BpeModel {
public:
    BpeModel() = default;
    BpeModel(std::vector<MergeRule> merges, Vocabulary vocab, bool uncased);

    // The encode cache's mutex is per-instance state, not part of the value.
    BpeModel(const BpeModel& other)
        : merges_(other.merges_), vocab_(other.vocab_), uncased_(other.uncased_) {
        std::lock_guard<std::mutex> lock(other.cache_mutex_);
        word_cache_ = other.word_cache_;
    }
    BpeModel& operator=(const BpeModel& other) {
        if (this == &other) return *this;
        std::scoped_lock lock(cache_mutex_, other.cache_mutex_);
        merges_ = other.merges_;
        vocab_ = other.vocab_;
        uncased_ = other.uncased_;
        word_cache_ = other.word_cache_;
        return *this;
    }

    // Replaces the vocabulary (id assignment) while keeping the merges.
    // Used after vocabulary augmentation: segmentation stays the same, ids
    // come from the augmented vocabulary.
    BpeModel with_vocab(Vocabulary vocab) const;

    std::vector<int> encode(std::string_view text) const;
    std::string decode(const std::vector<int>& ids) const;

    const Vocabulary& vocab() const { return vocab_; }
    const std::vector<MergeRule>& merges() const { return merges_; }
    bool uncased() const { return uncased_; }

    void save(const std::string& vocab_path, const std::string& merges_path) const;
    static BpeModel load(const std::string& vocab_path,
                         const std::string& merges_path, bool uncased = true);

private:
    std::vector<std::string> segment_word(const std::string& word) const;

    std::vector<MergeRule> merges_;
    Vocabulary vocab_;
    bool uncased_ = true;

    mutable std::mutex cache_mutex_;
    mutable std::unordered_map<std::string, std::vector<int>> word_cache_;
};

// Trains a byte-level BPE model. Whitespace runs pre-segment the text;
// merges never cross a run boundary. Ties in pair frequency break by
// lexicographic order of (left, right).
BpeModel train_bpe(const std::vector<std::string>& corpus, size_t vocab_size,
                   const std::vector<std::string>& special_tokens =
                       default_special_tokens(),
                   bool uncased = true);

}  // namespace blm::bpe
