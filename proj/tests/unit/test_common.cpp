// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "vulnrisk/common.hpp"
#include "vulnrisk/csv.hpp"
#include "vulnrisk/error.hpp"

using namespace vulnrisk;

TEST_CASE("CVE id validation") {
    CHECK(is_valid_cve_id("CVE-2021-44228"));
    CHECK(is_valid_cve_id("CVE-1999-0001"));
    CHECK(is_valid_cve_id("CVE-2020-1234567"));
    CHECK_FALSE(is_valid_cve_id("CVE-2021-123"));
    CHECK_FALSE(is_valid_cve_id("cve-2021-44228"));
    CHECK_FALSE(is_valid_cve_id("GHSA-xxxx-yyyy-zzzz"));
    CHECK_FALSE(is_valid_cve_id("CVE-21-44228"));
    CHECK_FALSE(is_valid_cve_id("CVE-2021-44228 "));
}

TEST_CASE("whitespace normalization") {
    CHECK(normalize_whitespace("  a\t b\n\nc ") == "a b c");
    CHECK(normalize_whitespace("") == "");
}

TEST_CASE("FNV-1a reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("SplitMix64 determinism and bounds") {
    SplitMix64 a(7), b(7);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    SplitMix64 r(1);
    for (int i = 0; i < 1000; ++i) {
        CHECK(r.below(7) < 7);
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("shuffled_indices is a seeded permutation") {
    auto p = shuffled_indices(100, 3);
    CHECK(p == shuffled_indices(100, 3));
    CHECK(p != shuffled_indices(100, 4));
    std::sort(p.begin(), p.end());
    std::vector<std::size_t> iota(100);
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(p == iota);
}

TEST_CASE("number formatting") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(7.5) == "7.5");
    CHECK(format_fixed(-0.00001, 4) == "0.0000");
    CHECK(format_fixed(23.9599, 2) == "23.96");
}

TEST_CASE("atomic file write") {
    const auto dir = std::filesystem::temp_directory_path() / "vulnrisk-common-test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "x.txt", "hello");
    CHECK(read_file(dir / "x.txt") == "hello");
    write_file_atomic(dir / "x.txt", "bye");
    CHECK(read_file(dir / "x.txt") == "bye");
    try {
        (void)read_file(dir / "missing");
        FAIL("expected Io");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Io);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("CSV parse and format round-trip") {
    const auto rows = csv::parse("\xef\xbb\xbf" "a,b\n\"x,1\",\"say \"\"hi\"\"\"\n\nmulti,\"line\nvalue\"\nlast,row");
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].fields == std::vector<std::string>{"a", "b"});
    CHECK(rows[1].fields == std::vector<std::string>{"x,1", "say \"hi\""});
    CHECK(rows[2].line == 4);
    CHECK(rows[2].fields[1] == "line\nvalue");
    CHECK(rows[3].line == 6);
    const std::vector<std::string> fields{"plain", "with,comma", "q\"uote", ""};
    CHECK(csv::parse(csv::format_row(fields)).front().fields == fields);
    try {
        (void)csv::parse("a,\"open");
        FAIL("expected Schema");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Schema);
    }
}
