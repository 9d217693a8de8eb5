// SPDX-License-Identifier: Apache-2.0
#include "vulnrisk/text.hpp"

#include <algorithm>
#include <cctype>

#include "vulnrisk/common.hpp"
#include "vulnrisk/embedded_data.hpp"
#include "vulnrisk/error.hpp"

namespace vulnrisk::text {
namespace {

bool is_word_byte(unsigned char ch) noexcept {
    return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch >= 0x80;
}

}  // namespace

StopWords::StopWords(std::vector<std::string> words) {
    for (auto& w : words) w = to_lower_ascii(w);
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    words_ = std::move(words);
    lookup_.insert(words_.begin(), words_.end());
}

StopWords StopWords::parse(std::string_view text) {
    std::vector<std::string> words;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = normalize_whitespace(text.substr(pos, end - pos));
        if (!line.empty() && line.front() != '#') words.push_back(std::move(line));
        pos = end + 1;
    }
    return StopWords(std::move(words));
}

StopWords StopWords::load(const std::filesystem::path& path) { return parse(read_file(path)); }

const StopWords& StopWords::builtin() {
    static const StopWords list = parse(data::stopwords_v1());
    return list;
}

bool StopWords::contains(std::string_view word) const { return lookup_.contains(std::string(word)); }

std::string StopWords::fingerprint() const {
    std::string joined;
    for (const auto& w : words_) {
        joined += w;
        joined.push_back('\n');
    }
    return hex64(fnv1a64(joined));
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char raw : text) {
        const auto ch = static_cast<unsigned char>(raw);
        if (is_word_byte(ch)) {
            current.push_back(ch < 0x80 ? static_cast<char>(std::tolower(ch)) : raw);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

TokenSeq preprocess(std::string_view description, const StopWords& stop_words, std::size_t max_tokens) {
    if (max_tokens <= kSpecialTokenSlots) {
        throw Error(ErrorCode::Domain, "max_tokens must exceed the two special-token slots");
    }
    const auto words = tokenize(description);
    TokenSeq seq;
    seq.word_count = words.size();
    for (const auto& w : words) {
        if (!stop_words.contains(w)) seq.tokens.push_back(w);
    }
    if (seq.tokens.empty()) throw Error(ErrorCode::EmptyAfterPreprocess, "description has no content tokens");
    seq.original_length = seq.tokens.size();
    const auto limit = max_tokens - kSpecialTokenSlots;
    if (seq.tokens.size() > limit) {
        seq.tokens.resize(limit);
        seq.truncated = true;
    }
    return seq;
}

}  // namespace vulnrisk::text
