// SPDX-License-Identifier: Apache-2.0
/**
 * @file evaluation.hpp
 * @brief Dataset splitting, classification metrics, score error/bias and the
 *        masked-ground-truth experiment.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vulnrisk/imputer.hpp"
#include "vulnrisk/nvd_store.hpp"

namespace vulnrisk::eval {

// ---------------------------------------------------------------------------
// Splitting

struct SplitRatios {
    double train = 0.8;
    double validation = 0.1;
    double test = 0.1;

    friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

/// Shuffles 0..n-1 with `seed`, then slices. Validation and test sizes are
/// floor(ratio * n); training takes the remainder so the split is exhaustive.
/// Throws Domain unless the ratios are non-negative and sum to 1.
SplitIndices split_indices(std::size_t n, const SplitRatios& ratios, std::uint64_t seed);

template <typename T>
struct Split {
    std::vector<T> train;
    std::vector<T> validation;
    std::vector<T> test;
};

template <typename T>
Split<T> split_dataset(const std::vector<T>& records, const SplitRatios& ratios, std::uint64_t seed) {
    const auto idx = split_indices(records.size(), ratios, seed);
    Split<T> out;
    const auto take = [&](const std::vector<std::size_t>& from, std::vector<T>& to) {
        to.reserve(from.size());
        for (auto i : from) to.push_back(records[i]);
    };
    take(idx.train, out.train);
    take(idx.validation, out.validation);
    take(idx.test, out.test);
    return out;
}

// ---------------------------------------------------------------------------
// Classification metrics

struct ClassificationReport {
    std::size_t num_classes = 0;
    std::size_t samples = 0;
    double accuracy = 0.0;
    double precision_weighted = 0.0;
    double recall_weighted = 0.0;
    double f1_weighted = 0.0;
    double f1_micro = 0.0;
    /// confusion[true][predicted]
    std::vector<std::vector<std::size_t>> confusion;
};

/// Weighted averages weight each class by its true-class support; classes
/// with an empty denominator score 0. Throws LengthMismatch for unequal or
/// empty inputs and Domain for out-of-range classes.
ClassificationReport classification_metrics(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                            std::size_t num_classes);

// ---------------------------------------------------------------------------
// Score error and bias

/// |true - predicted| / true * 100. nullopt when true_value is 0, where the
/// formula is undefined; callers exclude such pairs from averages.
std::optional<double> percentage_error(double true_value, double predicted_value) noexcept;

/// true - predicted. Negative values mean the prediction overestimates.
inline double bias(double true_value, double predicted_value) noexcept { return true_value - predicted_value; }

// ---------------------------------------------------------------------------
// Masking experiment

struct ComponentRecords {
    std::string component;
    std::vector<nvd::CveRecord> records;  ///< complete vectors only
};

struct MaskedCve {
    std::string component;
    std::string cve_id;
    cvss::Cvss2Vector true_vector;
    cvss::Cvss2Vector imputed_vector;
    cvss::ScoreTriple true_scores;
    cvss::ScoreTriple imputed_scores;
    std::optional<double> impact_error_pct;
    std::optional<double> exploitability_error_pct;
    std::optional<double> base_error_pct;
    double impact_bias = 0.0;
    double exploitability_bias = 0.0;
    double base_bias = 0.0;
};

struct ErrorBiasRow {
    std::string component;
    std::size_t n_records = 0;
    std::size_t n_masked = 0;
    /// Means over masked CVEs with a non-zero true score; nullopt if none.
    std::optional<double> impact_error_pct;
    std::optional<double> exploitability_error_pct;
    std::optional<double> base_error_pct;
    double impact_bias = 0.0;
    double exploitability_bias = 0.0;
    double base_bias = 0.0;
};

struct ZeroTrueCounters {
    std::size_t impact = 0;
    std::size_t exploitability = 0;
    std::size_t base = 0;
};

struct SkippedComponent {
    std::string component;
    std::string reason;
};

struct MaskingResult {
    double mask_fraction = 0.0;
    std::uint64_t seed = 0;
    std::vector<ErrorBiasRow> rows;  ///< one per evaluated component, input order
    std::vector<MaskedCve> cves;
    ZeroTrueCounters zero_true_excluded;
    std::vector<SkippedComponent> skipped;
};

/// Number of records hidden in a component of n records: ceil(fraction * n).
std::size_t masked_count(std::size_t n, double mask_fraction) noexcept;

/// Hides the vectors of ceil(mask_fraction * n) records per component
/// (seeded per component), imputes them from their descriptions, scores true
/// and imputed vectors, and reports per-CVE and per-component error and bias.
/// Components with fewer than two records are skipped and listed. Throws
/// Domain unless 0 <= mask_fraction < 1 and every record is complete.
MaskingResult masking_experiment(const std::vector<ComponentRecords>& groups, double mask_fraction, std::uint64_t seed,
                                 const impute::Imputer& imputer, std::size_t workers = 1);

/// Table-style outputs: errors (component + three error columns), biases
/// (component + three bias columns) and a JSON bundle with per-CVE detail.
std::string error_table_csv(const MaskingResult& result);
std::string bias_table_csv(const MaskingResult& result);
std::string masking_json(const MaskingResult& result);

}  // namespace vulnrisk::eval
