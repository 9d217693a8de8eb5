// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vulnrisk {

/// "CVE-YYYY-NNNN" with at least four sequence digits.
bool is_valid_cve_id(std::string_view id) noexcept;

/// Trims and collapses whitespace runs to a single space.
std::string normalize_whitespace(std::string_view text);

std::string to_lower_ascii(std::string_view text);

/// 64-bit FNV-1a. Stable across platforms, used for feature hashing,
/// seed derivation and content fingerprints.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;
std::string hex64(std::uint64_t value);

/// Reads a whole file; throws Error(Io).
std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename; throws Error(Io).
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Locale-independent shortest round-trip formatting of a double.
std::string format_double(double value);
/// Fixed-point formatting with `digits` decimals.
std::string format_fixed(double value, int digits);

/// Deterministic 64-bit generator (splitmix64) with an unbiased bounded draw.
/// Used wherever results must be identical across standard libraries.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
    std::uint64_t next() noexcept;
    /// Uniform in [0, bound); bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept;
    /// Uniform in [0, 1).
    double uniform() noexcept;

private:
    std::uint64_t state_;
};

/// Fisher-Yates permutation of 0..n-1 driven by SplitMix64.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

}  // namespace vulnrisk
