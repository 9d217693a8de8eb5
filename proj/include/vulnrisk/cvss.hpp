// SPDX-License-Identifier: Apache-2.0
/**
 * @file cvss.hpp
 * @brief CVSS v2 base metrics: representation, vector-string parsing and scoring.
 *
 * A vector holds the six base metrics. Each metric is either one of its three
 * legal labels or missing (not reported by the database). Scoring requires a
 * complete vector.
 */
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace vulnrisk::cvss {

enum class Metric : std::uint8_t {
    AccessVector,
    AccessComplexity,
    Authentication,
    ConfidentialityImpact,
    IntegrityImpact,
    AvailabilityImpact,
};

inline constexpr std::size_t kMetricCount = 6;
inline constexpr std::size_t kLabelsPerMetric = 3;

inline constexpr std::array<Metric, kMetricCount> kAllMetrics{
    Metric::AccessVector,          Metric::AccessComplexity, Metric::Authentication,
    Metric::ConfidentialityImpact, Metric::IntegrityImpact,  Metric::AvailabilityImpact,
};

/// Union of all metric labels. `None` is shared by Authentication and the
/// three impact metrics; its weight depends on the metric it belongs to.
enum class Label : std::uint8_t {
    Local,
    AdjacentNetwork,
    Network,
    High,
    Medium,
    Low,
    Multiple,
    Single,
    None,
    Partial,
    Complete,
};

/// The metric's legal labels in ascending weight order. The position of a
/// label in this array is its class index for classification.
const std::array<Label, kLabelsPerMetric>& labels_of(Metric metric) noexcept;

bool is_legal(Metric metric, Label label) noexcept;

/// Class index of `label` within `metric`; throws MalformedVector if illegal.
std::size_t class_index(Metric metric, Label label);
Label label_at(Metric metric, std::size_t class_index);

/// Vector-string key: "AV", "AC", "Au", "C", "I", "A".
std::string_view metric_key(Metric metric) noexcept;
/// Human-readable name, e.g. "Access Vector".
std::string_view metric_name(Metric metric) noexcept;
/// Column-style name, e.g. "access_vector".
std::string_view metric_column(Metric metric) noexcept;
/// Single-letter vector code, e.g. 'N' for Network.
char label_code(Metric metric, Label label);
/// NVD enumeration text, e.g. "ADJACENT_NETWORK".
std::string_view label_text(Label label) noexcept;

std::optional<Metric> metric_from_key(std::string_view key) noexcept;
std::optional<Label> label_from_code(Metric metric, char code) noexcept;
/// Accepts NVD enumeration text case-insensitively ("NETWORK", "adjacent_network")
/// as well as single-letter vector codes; returns nullopt for labels outside
/// the metric's legal set.
std::optional<Label> parse_label(Metric metric, std::string_view text);

/// Specification constant for a label. Throws MissingLabel if `label` is empty,
/// MalformedVector if the label is not legal for the metric.
double numeric_weight(Metric metric, std::optional<Label> label);

class Cvss2Vector {
public:
    Cvss2Vector() = default;

    [[nodiscard]] std::optional<Label> get(Metric metric) const noexcept {
        return labels_[static_cast<std::size_t>(metric)];
    }
    /// Throws MalformedVector if the label is not legal for the metric.
    void set(Metric metric, std::optional<Label> label);

    [[nodiscard]] bool is_complete() const noexcept;
    [[nodiscard]] bool is_empty() const noexcept;
    [[nodiscard]] std::size_t present_count() const noexcept;

    /// Canonical "AV:x/AC:x/Au:x/C:x/I:x/A:x". Requires a complete vector.
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const Cvss2Vector&, const Cvss2Vector&) = default;

private:
    std::array<std::optional<Label>, kMetricCount> labels_{};
};

/// Builds a complete vector from six labels in canonical metric order.
Cvss2Vector make_vector(Label av, Label ac, Label au, Label c, Label i, Label a);

/// Parses the standard short form. Keys may appear in any order but each
/// exactly once. Throws MalformedVector.
Cvss2Vector parse_vector(std::string_view text);

/// 10.41 * (1 - (1-C)(1-I)(1-A)), unclamped.
double impact_score(const Cvss2Vector& v);
/// 20 * AV * AC * Au.
double exploitability_score(const Cvss2Vector& v);
/// ((0.6*Impact + 0.4*Exploitability - 1.5) * f(Impact)) before rounding.
double raw_base_score(const Cvss2Vector& v);
/// raw_base_score rounded to one decimal place.
double base_score(const Cvss2Vector& v);

double round_to_one_decimal(double value) noexcept;

struct ScoreTriple {
    double impact = 0.0;  ///< clamped to [0, 10] for reporting
    double exploitability = 0.0;
    double base = 0.0;    ///< rounded to one decimal

    friend bool operator==(const ScoreTriple&, const ScoreTriple&) = default;
};

ScoreTriple score(const Cvss2Vector& v);

}  // namespace vulnrisk::cvss
