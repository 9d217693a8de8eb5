// SPDX-License-Identifier: Apache-2.0
#include "vulnrisk/cvss.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <vector>

#include "vulnrisk/error.hpp"

namespace vulnrisk::cvss {
namespace {

struct LabelSpec {
    Label label;
    char code;
    double weight;
};

struct MetricSpec {
    std::string_view key;
    std::string_view name;
    std::string_view column;
    std::array<LabelSpec, kLabelsPerMetric> labels;  // ascending weight
};

// CVSS v2 base metric constants (CVSS v2 complete guide, section 3.2.1).
constexpr std::array<MetricSpec, kMetricCount> kSpecs{{
    {"AV", "Access Vector", "access_vector",
     {{{Label::Local, 'L', 0.395}, {Label::AdjacentNetwork, 'A', 0.646}, {Label::Network, 'N', 1.0}}}},
    {"AC", "Access Complexity", "access_complexity",
     {{{Label::High, 'H', 0.35}, {Label::Medium, 'M', 0.61}, {Label::Low, 'L', 0.71}}}},
    {"Au", "Authentication", "authentication",
     {{{Label::Multiple, 'M', 0.45}, {Label::Single, 'S', 0.56}, {Label::None, 'N', 0.704}}}},
    {"C", "Confidentiality Impact", "confidentiality_impact",
     {{{Label::None, 'N', 0.0}, {Label::Partial, 'P', 0.275}, {Label::Complete, 'C', 0.660}}}},
    {"I", "Integrity Impact", "integrity_impact",
     {{{Label::None, 'N', 0.0}, {Label::Partial, 'P', 0.275}, {Label::Complete, 'C', 0.660}}}},
    {"A", "Availability Impact", "availability_impact",
     {{{Label::None, 'N', 0.0}, {Label::Partial, 'P', 0.275}, {Label::Complete, 'C', 0.660}}}},
}};

constexpr std::array<std::string_view, 11> kLabelText{
    "LOCAL", "ADJACENT_NETWORK", "NETWORK", "HIGH", "MEDIUM", "LOW",
    "MULTIPLE", "SINGLE", "NONE", "PARTIAL", "COMPLETE",
};

const MetricSpec& spec(Metric metric) noexcept { return kSpecs[static_cast<std::size_t>(metric)]; }

const LabelSpec* find_label(Metric metric, Label label) noexcept {
    for (const auto& entry : spec(metric).labels) {
        if (entry.label == label) return &entry;
    }
    return nullptr;
}

[[noreturn]] void malformed(const std::string& message) {
    throw Error(ErrorCode::MalformedVector, message);
}

double weight_of(const Cvss2Vector& v, Metric metric) { return numeric_weight(metric, v.get(metric)); }

}  // namespace

const std::array<Label, kLabelsPerMetric>& labels_of(Metric metric) noexcept {
    static const auto table = [] {
        std::array<std::array<Label, kLabelsPerMetric>, kMetricCount> out{};
        for (std::size_t m = 0; m < kMetricCount; ++m) {
            for (std::size_t k = 0; k < kLabelsPerMetric; ++k) out[m][k] = kSpecs[m].labels[k].label;
        }
        return out;
    }();
    return table[static_cast<std::size_t>(metric)];
}

bool is_legal(Metric metric, Label label) noexcept { return find_label(metric, label) != nullptr; }

std::size_t class_index(Metric metric, Label label) {
    const auto& labels = spec(metric).labels;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k].label == label) return k;
    }
    malformed(std::string(label_text(label)) + " is not a legal " + std::string(metric_name(metric)) + " label");
}

Label label_at(Metric metric, std::size_t index) {
    if (index >= kLabelsPerMetric) malformed("class index out of range");
    return spec(metric).labels[index].label;
}

std::string_view metric_key(Metric metric) noexcept { return spec(metric).key; }
std::string_view metric_name(Metric metric) noexcept { return spec(metric).name; }
std::string_view metric_column(Metric metric) noexcept { return spec(metric).column; }

char label_code(Metric metric, Label label) {
    const auto* entry = find_label(metric, label);
    if (entry == nullptr) malformed("illegal label for " + std::string(metric_key(metric)));
    return entry->code;
}

std::string_view label_text(Label label) noexcept { return kLabelText[static_cast<std::size_t>(label)]; }

std::optional<Metric> metric_from_key(std::string_view key) noexcept {
    for (auto metric : kAllMetrics) {
        if (spec(metric).key == key) return metric;
    }
    return std::nullopt;
}

std::optional<Label> label_from_code(Metric metric, char code) noexcept {
    for (const auto& entry : spec(metric).labels) {
        if (entry.code == code) return entry.label;
    }
    return std::nullopt;
}

std::optional<Label> parse_label(Metric metric, std::string_view text) {
    std::string upper;
    upper.reserve(text.size());
    for (char ch : text) {
        if (ch == ' ' || ch == '-') ch = '_';
        upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    }
    if (upper.size() == 1) return label_from_code(metric, upper[0]);
    if (upper == "ADJACENTNETWORK") upper = "ADJACENT_NETWORK";
    for (const auto& entry : spec(metric).labels) {
        if (label_text(entry.label) == upper) return entry.label;
    }
    return std::nullopt;
}

double numeric_weight(Metric metric, std::optional<Label> label) {
    if (!label) {
        throw Error(ErrorCode::MissingLabel,
                    std::string(metric_name(metric)) + " is missing; impute it before scoring");
    }
    const auto* entry = find_label(metric, *label);
    if (entry == nullptr) malformed("illegal label for " + std::string(metric_key(metric)));
    return entry->weight;
}

void Cvss2Vector::set(Metric metric, std::optional<Label> label) {
    if (label && !is_legal(metric, *label)) {
        malformed(std::string(label_text(*label)) + " is not a legal " + std::string(metric_name(metric)) + " label");
    }
    labels_[static_cast<std::size_t>(metric)] = label;
}

bool Cvss2Vector::is_complete() const noexcept {
    return std::all_of(labels_.begin(), labels_.end(), [](const auto& l) { return l.has_value(); });
}

bool Cvss2Vector::is_empty() const noexcept {
    return std::none_of(labels_.begin(), labels_.end(), [](const auto& l) { return l.has_value(); });
}

std::size_t Cvss2Vector::present_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(), [](const auto& l) { return l.has_value(); }));
}

std::string Cvss2Vector::to_string() const {
    std::string out;
    for (auto metric : kAllMetrics) {
        const auto label = get(metric);
        if (!label) {
            throw Error(ErrorCode::MissingLabel, "cannot serialize incomplete vector: " +
                                                     std::string(metric_key(metric)) + " missing");
        }
        if (!out.empty()) out.push_back('/');
        out.append(metric_key(metric));
        out.push_back(':');
        out.push_back(label_code(metric, *label));
    }
    return out;
}

Cvss2Vector make_vector(Label av, Label ac, Label au, Label c, Label i, Label a) {
    Cvss2Vector v;
    const std::array<Label, kMetricCount> labels{av, ac, au, c, i, a};
    for (std::size_t m = 0; m < kMetricCount; ++m) v.set(kAllMetrics[m], labels[m]);
    return v;
}

Cvss2Vector parse_vector(std::string_view text) {
    // NVD occasionally wraps vectors in parentheses: "(AV:N/AC:L/...)".
    if (text.size() >= 2 && text.front() == '(' && text.back() == ')') text = text.substr(1, text.size() - 2);

    Cvss2Vector v;
    std::array<bool, kMetricCount> seen{};
    std::size_t count = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto slash = text.find('/', pos);
        const auto part = text.substr(pos, slash == std::string_view::npos ? std::string_view::npos : slash - pos);
        const auto colon = part.find(':');
        if (colon == std::string_view::npos) malformed("component '" + std::string(part) + "' lacks ':'");
        const auto key = part.substr(0, colon);
        const auto value = part.substr(colon + 1);
        const auto metric = metric_from_key(key);
        if (!metric) malformed("unknown metric key '" + std::string(key) + "'");
        const auto index = static_cast<std::size_t>(*metric);
        if (seen[index]) malformed("duplicate metric key '" + std::string(key) + "'");
        if (value.size() != 1) malformed("bad value '" + std::string(value) + "' for " + std::string(key));
        const auto label = label_from_code(*metric, value[0]);
        if (!label) malformed("unknown value '" + std::string(value) + "' for " + std::string(key));
        seen[index] = true;
        v.set(*metric, label);
        ++count;
        if (slash == std::string_view::npos) break;
        pos = slash + 1;
    }
    if (count != kMetricCount) malformed("expected 6 metrics, got " + std::to_string(count));
    return v;
}

double impact_score(const Cvss2Vector& v) {
    const double c = weight_of(v, Metric::ConfidentialityImpact);
    const double i = weight_of(v, Metric::IntegrityImpact);
    const double a = weight_of(v, Metric::AvailabilityImpact);
    return 10.41 * (1.0 - (1.0 - c) * (1.0 - i) * (1.0 - a));
}

double exploitability_score(const Cvss2Vector& v) {
    return 20.0 * weight_of(v, Metric::AccessVector) * weight_of(v, Metric::AccessComplexity) *
           weight_of(v, Metric::Authentication);
}

double raw_base_score(const Cvss2Vector& v) {
    const double impact = impact_score(v);
    const double exploitability = exploitability_score(v);
    const double f_impact = impact == 0.0 ? 0.0 : 1.176;
    return (0.6 * impact + 0.4 * exploitability - 1.5) * f_impact;
}

double round_to_one_decimal(double value) noexcept {
    // The epsilon absorbs representation error such as 7.4999999999 for 7.5.
    return std::round(value * 10.0 + 1e-9) / 10.0;
}

double base_score(const Cvss2Vector& v) { return round_to_one_decimal(raw_base_score(v)); }

ScoreTriple score(const Cvss2Vector& v) {
    ScoreTriple out;
    out.impact = std::clamp(impact_score(v), 0.0, 10.0);
    out.exploitability = exploitability_score(v);
    out.base = base_score(v);
    return out;
}

}  // namespace vulnrisk::cvss
