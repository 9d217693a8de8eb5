// SPDX-License-Identifier: Apache-2.0
#include "vulnrisk/scan_ingest.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "json.hpp"
#include "vulnrisk/common.hpp"
#include "vulnrisk/csv.hpp"
#include "vulnrisk/error.hpp"

namespace vulnrisk::scan {
namespace {

using nlohmann::json;

std::string str_field(const json& node, const char* key) {
    const auto it = node.find(key);
    return it != node.end() && it->is_string() ? it->get<std::string>() : std::string{};
}

void parse_one_trivy(const json& doc, ScanReport& out) {
    if (!doc.is_object()) throw Error(ErrorCode::Schema, "trivy report must be a JSON object");
    const auto artifact = str_field(doc, "ArtifactName");
    if (out.scanned_at.empty()) out.scanned_at = str_field(doc, "CreatedAt");
    const auto results = doc.find("Results");
    if (results == doc.end() || results->is_null()) return;
    if (!results->is_array()) throw Error(ErrorCode::Schema, "trivy 'Results' must be an array");
    for (const auto& result : *results) {
        if (!result.is_object()) throw Error(ErrorCode::Schema, "trivy result entry must be an object");
        auto component = component_from_image(artifact.empty() ? str_field(result, "Target") : artifact);
        const auto vulns = result.find("Vulnerabilities");
        if (vulns == result.end() || vulns->is_null()) continue;
        if (!vulns->is_array()) throw Error(ErrorCode::Schema, "trivy 'Vulnerabilities' must be an array");
        if (component.empty()) throw Error(ErrorCode::Schema, "trivy report has neither ArtifactName nor Target");
        for (const auto& vuln : *vulns) {
            const auto id = str_field(vuln, "VulnerabilityID");
            if (id.empty()) throw Error(ErrorCode::Schema, "trivy vulnerability lacks VulnerabilityID");
            if (!is_valid_cve_id(id)) {
                ++out.skipped_non_cve;
                continue;
            }
            out.findings.push_back({component, id, str_field(vuln, "PkgName"), str_field(vuln, "Severity")});
        }
    }
}

std::string trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t");
    if (first == std::string_view::npos) return {};
    const auto last = text.find_last_not_of(" \t");
    return std::string(text.substr(first, last - first + 1));
}

}  // namespace

std::string_view scan_source_name(ScanSource source) noexcept {
    return source == ScanSource::TrivyJson ? "trivy-json" : "csv";
}

std::optional<ScanSource> parse_scan_source(std::string_view name) noexcept {
    if (name == "trivy-json") return ScanSource::TrivyJson;
    if (name == "csv") return ScanSource::Csv;
    return std::nullopt;
}

std::string component_from_image(std::string_view artifact) {
    if (const auto at = artifact.find('@'); at != std::string_view::npos) artifact = artifact.substr(0, at);
    // Trivy targets may carry an OS suffix: "image:tag (debian 9.13)".
    if (const auto space = artifact.find(' '); space != std::string_view::npos) artifact = artifact.substr(0, space);
    const auto last_slash = artifact.rfind('/');
    const auto colon = artifact.rfind(':');
    // A colon before the last slash is a registry port, not a tag.
    if (colon != std::string_view::npos && (last_slash == std::string_view::npos || colon > last_slash)) {
        artifact = artifact.substr(0, colon);
    }
    return std::string(artifact);
}

void canonicalize(std::vector<Finding>& findings) {
    std::sort(findings.begin(), findings.end(), [](const Finding& a, const Finding& b) {
        return std::tie(a.component, a.cve_id, a.package, a.severity_hint) <
               std::tie(b.component, b.cve_id, b.package, b.severity_hint);
    });
    const auto last = std::unique(findings.begin(), findings.end(), [](const Finding& a, const Finding& b) {
        return a.component == b.component && a.cve_id == b.cve_id;
    });
    findings.erase(last, findings.end());
}

ScanReport parse_trivy_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Schema, std::string("trivy report is not valid JSON: ") + e.what());
    }
    ScanReport report;
    report.source = ScanSource::TrivyJson;
    if (doc.is_array()) {
        for (const auto& entry : doc) parse_one_trivy(entry, report);
    } else {
        parse_one_trivy(doc, report);
    }
    canonicalize(report.findings);
    return report;
}

ScanReport parse_trivy_json_file(const std::filesystem::path& path) { return parse_trivy_json(read_file(path)); }

ScanReport parse_csv(std::string_view text) {
    const auto rows = csv::parse(text);
    if (rows.empty()) throw Error(ErrorCode::Schema, "scan CSV is empty; expected a header row");

    std::map<std::string, std::size_t> columns;
    for (std::size_t i = 0; i < rows.front().fields.size(); ++i) columns.emplace(to_lower_ascii(trim(rows.front().fields[i])), i);
    const auto required = [&](const char* name) {
        const auto it = columns.find(name);
        if (it == columns.end()) throw Error(ErrorCode::Schema, std::string("scan CSV lacks required column '") + name + "'");
        return it->second;
    };
    const auto component_col = required("component");
    const auto cve_col = required("cve_id");
    const auto optional_col = [&](const char* name) -> std::optional<std::size_t> {
        const auto it = columns.find(name);
        return it == columns.end() ? std::nullopt : std::optional(it->second);
    };
    const auto package_col = optional_col("package");
    const auto severity_col = optional_col("severity_hint");

    ScanReport report;
    report.source = ScanSource::Csv;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const auto field = [&](std::optional<std::size_t> col) {
            return col && *col < row.fields.size() ? trim(row.fields[*col]) : std::string{};
        };
        Finding finding{field(component_col), field(cve_col), field(package_col), field(severity_col)};
        if (finding.component.empty()) {
            report.row_errors.push_back({row.line, "empty component"});
            continue;
        }
        if (!is_valid_cve_id(finding.cve_id)) {
            if (finding.cve_id.starts_with("GHSA-")) {
                ++report.skipped_non_cve;
            } else {
                report.row_errors.push_back({row.line, "malformed CVE id '" + finding.cve_id + "'"});
            }
            continue;
        }
        report.findings.push_back(std::move(finding));
    }
    canonicalize(report.findings);
    return report;
}

ScanReport parse_csv_file(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

std::vector<ComponentFindings> components(const ScanReport& report) {
    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& finding : report.findings) groups[finding.component].push_back(finding.cve_id);
    std::vector<ComponentFindings> out;
    out.reserve(groups.size());
    for (auto& [component, ids] : groups) {
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        out.push_back({component, std::move(ids)});
    }
    return out;
}

std::string to_json(const ScanReport& report) {
    nlohmann::ordered_json doc;
    doc["source"] = scan_source_name(report.source);
    doc["scanned_at"] = report.scanned_at;
    doc["skipped_non_cve"] = report.skipped_non_cve;
    auto& errors = doc["row_errors"] = nlohmann::ordered_json::array();
    for (const auto& e : report.row_errors) errors.push_back({{"line", e.line}, {"message", e.message}});
    auto& findings = doc["findings"] = nlohmann::ordered_json::array();
    for (const auto& f : report.findings) {
        findings.push_back(
            {{"component", f.component}, {"cve_id", f.cve_id}, {"package", f.package}, {"severity_hint", f.severity_hint}});
    }
    return doc.dump(2) + "\n";
}

ScanReport from_json(std::string_view text) {
    try {
        const auto doc = json::parse(text);
        ScanReport report;
        const auto source = parse_scan_source(doc.at("source").get<std::string>());
        if (!source) throw Error(ErrorCode::Schema, "unknown scan source");
        report.source = *source;
        report.scanned_at = doc.value("scanned_at", std::string{});
        report.skipped_non_cve = doc.value("skipped_non_cve", std::size_t{0});
        for (const auto& e : doc.value("row_errors", json::array())) {
            report.row_errors.push_back({e.at("line").get<std::size_t>(), e.at("message").get<std::string>()});
        }
        for (const auto& f : doc.at("findings")) {
            Finding finding{f.at("component").get<std::string>(), f.at("cve_id").get<std::string>(),
                            f.value("package", std::string{}), f.value("severity_hint", std::string{})};
            if (finding.component.empty() || !is_valid_cve_id(finding.cve_id)) {
                throw Error(ErrorCode::Schema, "invalid finding in normalized scan report");
            }
            report.findings.push_back(std::move(finding));
        }
        canonicalize(report.findings);
        return report;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("invalid normalized scan report: ") + e.what());
    }
}

}  // namespace vulnrisk::scan
