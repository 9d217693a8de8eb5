// SPDX-License-Identifier: Apache-2.0
#include <string>

#include "doctest.h"
#include "vulnrisk/error.hpp"
#include "vulnrisk/text.hpp"

using namespace vulnrisk;
using namespace vulnrisk::text;

TEST_CASE("tokenize lower-cases and splits on punctuation") {
    CHECK(tokenize("The attacker MAY execute arbitrary-code.") ==
          std::vector<std::string>{"the", "attacker", "may", "execute", "arbitrary", "code"});
    CHECK(tokenize("  ,,  ").empty());
    CHECK(tokenize("caf\xc3\xa9 OK") == std::vector<std::string>{"caf\xc3\xa9", "ok"});
}

TEST_CASE("preprocess drops stop words") {
    const StopWords stop({"the", "MAY"});
    const auto seq = preprocess("The attacker MAY execute arbitrary code.", stop);
    CHECK(seq.tokens == std::vector<std::string>{"attacker", "execute", "arbitrary", "code"});
    CHECK_FALSE(seq.truncated);
    CHECK(seq.word_count == 6);
    CHECK(seq.original_length == 4);
}

TEST_CASE("preprocess truncates to max_tokens minus two") {
    std::string long_text;
    for (int i = 0; i < 300; ++i) long_text += "tok" + std::to_string(i) + " ";
    const auto seq = preprocess(long_text, StopWords::builtin(), 132);
    CHECK(seq.tokens.size() == 130);
    CHECK(seq.truncated);
    CHECK(seq.original_length == 300);
    CHECK(seq.tokens.front() == "tok0");
    CHECK(seq.tokens.back() == "tok129");
}

TEST_CASE("preprocess errors") {
    try {
        (void)preprocess("the and of it", StopWords::builtin());
        FAIL("expected EmptyAfterPreprocess");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyAfterPreprocess);
    }
    try {
        (void)preprocess("anything", StopWords::builtin(), 2);
        FAIL("expected Domain");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Domain);
    }
}

TEST_CASE("builtin stop-word list") {
    const auto& list = StopWords::builtin();
    CHECK(list.words().size() == 179);
    CHECK(list.contains("the"));
    CHECK(list.contains("wouldn"));
    CHECK_FALSE(list.contains("attacker"));
    CHECK(list.fingerprint() == StopWords::parse("# c\n" + [&] {
              std::string s;
              for (auto it = list.words().rbegin(); it != list.words().rend(); ++it) s += *it + "\n";
              return s;
          }()).fingerprint());
}
