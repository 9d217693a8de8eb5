// SPDX-License-Identifier: Apache-2.0
// Description preprocessing: word tokenization, stop-word removal, truncation.
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace vulnrisk::text {

/// Default model input length: 130 content tokens plus two special-token slots.
inline constexpr std::size_t kDefaultMaxTokens = 132;
inline constexpr std::size_t kSpecialTokenSlots = 2;
/// Descriptions with fewer words than this are flagged low-confidence.
inline constexpr std::size_t kLowConfidenceWordCount = 8;

struct TokenSeq {
    std::vector<std::string> tokens;
    bool truncated = false;
    std::size_t original_length = 0;  ///< content tokens before truncation
    std::size_t word_count = 0;       ///< words before stop-word removal
};

class StopWords {
public:
    /// One word per line, '#' comments and blank lines ignored.
    static StopWords parse(std::string_view text);
    static StopWords load(const std::filesystem::path& path);
    /// The list shipped in data/stopwords-v1.txt.
    static const StopWords& builtin();

    StopWords() = default;
    explicit StopWords(std::vector<std::string> words);

    [[nodiscard]] bool contains(std::string_view word) const;
    [[nodiscard]] const std::vector<std::string>& words() const noexcept { return words_; }
    /// Fingerprint of the sorted list, recorded in manifests and model files.
    [[nodiscard]] std::string fingerprint() const;

    friend bool operator==(const StopWords& a, const StopWords& b) { return a.words_ == b.words_; }

private:
    std::vector<std::string> words_;
    std::unordered_set<std::string> lookup_;
};

/// Lower-cases ASCII and splits on every byte that is not a letter, digit or
/// part of a multi-byte UTF-8 sequence.
std::vector<std::string> tokenize(std::string_view text);

/// Tokenizes, drops stop words and keeps at most max_tokens - 2 content tokens.
/// Throws EmptyAfterPreprocess when no content token survives and Domain when
/// max_tokens leaves no room for content.
TokenSeq preprocess(std::string_view description, const StopWords& stop_words,
                    std::size_t max_tokens = kDefaultMaxTokens);

}  // namespace vulnrisk::text
