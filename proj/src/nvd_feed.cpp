// SPDX-License-Identifier: Apache-2.0
// NVD feed parsing for the API 2.0 and legacy 1.1 JSON layouts.
#include <array>

#include "json.hpp"
#include "vulnrisk/common.hpp"
#include "vulnrisk/error.hpp"
#include "vulnrisk/nvd_store.hpp"

namespace vulnrisk::nvd {
namespace {

using nlohmann::json;
using cvss::Metric;

// Per-metric field names used by both layouts when no vectorString is given.
constexpr std::array<std::pair<Metric, const char*>, cvss::kMetricCount> kFieldNames{{
    {Metric::AccessVector, "accessVector"},
    {Metric::AccessComplexity, "accessComplexity"},
    {Metric::Authentication, "authentication"},
    {Metric::ConfidentialityImpact, "confidentialityImpact"},
    {Metric::IntegrityImpact, "integrityImpact"},
    {Metric::AvailabilityImpact, "availabilityImpact"},
}};

const json* child(const json& node, const char* key) {
    if (!node.is_object()) return nullptr;
    const auto it = node.find(key);
    if (it == node.end() || it->is_null()) return nullptr;
    return &*it;
}

std::string string_or_empty(const json* node) {
    return node != nullptr && node->is_string() ? node->get<std::string>() : std::string{};
}

// English first (first in feed order), else the first non-empty entry.
std::string pick_description(const json* entries, const char* lang_key, const char* value_key) {
    if (entries == nullptr || !entries->is_array()) return {};
    std::string fallback;
    for (const auto& entry : *entries) {
        auto text = normalize_whitespace(string_or_empty(child(entry, value_key)));
        if (text.empty()) continue;
        const auto lang = to_lower_ascii(string_or_empty(child(entry, lang_key)));
        if (lang == "en" || lang.starts_with("en-")) return text;
        if (fallback.empty()) fallback = std::move(text);
    }
    return fallback;
}

// Reads a CVSS v2 data object. A vectorString wins; otherwise individual
// fields are read and absent ones stay missing.
cvss::Cvss2Vector read_cvss_data(const json& data) {
    if (const auto* vs = child(data, "vectorString"); vs != nullptr && vs->is_string()) {
        return cvss::parse_vector(vs->get<std::string>());
    }
    cvss::Cvss2Vector v;
    for (const auto& [metric, name] : kFieldNames) {
        const auto text = string_or_empty(child(data, name));
        if (text.empty()) continue;
        const auto label = cvss::parse_label(metric, text);
        if (!label) {
            throw Error(ErrorCode::MalformedVector,
                        "unknown " + std::string(cvss::metric_key(metric)) + " value '" + text + "'");
        }
        v.set(metric, label);
    }
    return v;
}

std::string iso_date(std::string_view timestamp) {
    if (timestamp.size() >= 10 && timestamp[4] == '-' && timestamp[7] == '-') return std::string(timestamp.substr(0, 10));
    return std::string(timestamp);
}

struct EntryResult {
    std::optional<CveRecord> record;
    RejectedRecord rejected;
};

EntryResult finish(CveRecord record) {
    if (!is_valid_cve_id(record.cve_id)) return {std::nullopt, {record.cve_id, "invalid CVE id"}};
    if (record.description.empty()) return {std::nullopt, {record.cve_id, "empty description"}};
    return {std::move(record), {}};
}

EntryResult parse_api2_entry(const json& entry) {
    const json* cve = child(entry, "cve");
    if (cve == nullptr) return {std::nullopt, {"", "entry lacks 'cve' object"}};
    CveRecord record;
    record.cve_id = string_or_empty(child(*cve, "id"));
    record.description = pick_description(child(*cve, "descriptions"), "lang", "value");
    record.published_date = iso_date(string_or_empty(child(*cve, "published")));
    if (const json* metrics = child(*cve, "metrics")) {
        if (const json* v2 = child(*metrics, "cvssMetricV2"); v2 != nullptr && v2->is_array() && !v2->empty()) {
            const json* chosen = &v2->front();
            for (const auto& m : *v2) {
                if (string_or_empty(child(m, "type")) == "Primary") {
                    chosen = &m;
                    break;
                }
            }
            if (const json* data = child(*chosen, "cvssData")) {
                try {
                    record.vector = read_cvss_data(*data);
                } catch (const Error& e) {
                    return {std::nullopt, {record.cve_id, e.what()}};
                }
            }
        }
    }
    return finish(std::move(record));
}

EntryResult parse_legacy_entry(const json& entry) {
    const json* cve = child(entry, "cve");
    if (cve == nullptr) return {std::nullopt, {"", "entry lacks 'cve' object"}};
    CveRecord record;
    if (const json* meta = child(*cve, "CVE_data_meta")) record.cve_id = string_or_empty(child(*meta, "ID"));
    if (const json* desc = child(*cve, "description")) {
        record.description = pick_description(child(*desc, "description_data"), "lang", "value");
    }
    record.published_date = iso_date(string_or_empty(child(entry, "publishedDate")));
    if (const json* impact = child(entry, "impact")) {
        if (const json* base = child(*impact, "baseMetricV2")) {
            if (const json* data = child(*base, "cvssV2")) {
                try {
                    record.vector = read_cvss_data(*data);
                } catch (const Error& e) {
                    return {std::nullopt, {record.cve_id, e.what()}};
                }
            }
        }
    }
    return finish(std::move(record));
}

json parse_json(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Schema, std::string("feed is not valid JSON: ") + e.what());
    }
}

}  // namespace

std::string_view feed_format_name(FeedFormat format) noexcept {
    return format == FeedFormat::NvdApi2Json ? "nvd-api-2.0-json" : "legacy-feed-json";
}

std::optional<FeedFormat> parse_feed_format(std::string_view name) noexcept {
    if (name == "nvd-api-2.0-json") return FeedFormat::NvdApi2Json;
    if (name == "legacy-feed-json") return FeedFormat::LegacyFeedJson;
    return std::nullopt;
}

FeedFormat detect_feed_format(std::string_view text) {
    const auto doc = parse_json(text);
    if (doc.is_object() && doc.contains("vulnerabilities")) return FeedFormat::NvdApi2Json;
    if (doc.is_object() && doc.contains("CVE_Items")) return FeedFormat::LegacyFeedJson;
    throw Error(ErrorCode::Schema, "cannot detect feed format: no 'vulnerabilities' or 'CVE_Items' array");
}

ParsedFeed parse_feed(std::string_view text, FeedFormat format) {
    const auto doc = parse_json(text);
    const char* array_key = format == FeedFormat::NvdApi2Json ? "vulnerabilities" : "CVE_Items";
    const json* entries = child(doc, array_key);
    if (entries == nullptr || !entries->is_array()) {
        throw Error(ErrorCode::Schema, std::string("feed lacks top-level '") + array_key + "' array for " +
                                           std::string(feed_format_name(format)));
    }
    ParsedFeed out;
    out.entries = entries->size();
    for (const auto& entry : *entries) {
        auto result = format == FeedFormat::NvdApi2Json ? parse_api2_entry(entry) : parse_legacy_entry(entry);
        if (result.record) {
            out.records.push_back(std::move(*result.record));
        } else {
            out.rejected.push_back(std::move(result.rejected));
        }
    }
    return out;
}

}  // namespace vulnrisk::nvd
