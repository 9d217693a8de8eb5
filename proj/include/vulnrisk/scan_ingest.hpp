// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vulnrisk::scan {

struct Finding {
    std::string component;
    std::string cve_id;
    std::string package;        ///< optional, empty when unknown
    std::string severity_hint;  ///< verbatim scanner severity, never used for scoring

    friend bool operator==(const Finding&, const Finding&) = default;
};

enum class ScanSource { TrivyJson, Csv };

std::string_view scan_source_name(ScanSource source) noexcept;
std::optional<ScanSource> parse_scan_source(std::string_view name) noexcept;

struct RowError {
    std::size_t line = 0;
    std::string message;
};

struct ScanReport {
    /// Sorted by (component, cve_id) with one entry per pair.
    std::vector<Finding> findings;
    ScanSource source = ScanSource::TrivyJson;
    std::string scanned_at;  ///< scanner timestamp when the report carries one
    std::vector<RowError> row_errors;
    std::size_t skipped_non_cve = 0;  ///< GHSA and other non-CVE advisories
};

struct ComponentFindings {
    std::string component;
    std::vector<std::string> cve_ids;
};

/// "registry/repo/name:tag@sha256:..." -> "registry/repo/name".
std::string component_from_image(std::string_view artifact);

/// Parses a Trivy JSON report (or a JSON array of reports). Throws Error(Schema).
ScanReport parse_trivy_json(std::string_view text);
ScanReport parse_trivy_json_file(const std::filesystem::path& path);

/// Parses `component,cve_id[,package,severity_hint]` CSV. Throws Error(Schema)
/// when required columns are absent; bad rows land in row_errors.
ScanReport parse_csv(std::string_view text);
ScanReport parse_csv_file(const std::filesystem::path& path);

/// Sorts and deduplicates on (component, cve_id). For duplicates the
/// smallest (package, severity_hint) wins so the result is order-independent.
void canonicalize(std::vector<Finding>& findings);

/// Groups by component in lexicographic order.
std::vector<ComponentFindings> components(const ScanReport& report);

/// Normalized JSON form written by `import-scan` and read back by later steps.
std::string to_json(const ScanReport& report);
ScanReport from_json(std::string_view text);

}  // namespace vulnrisk::scan
