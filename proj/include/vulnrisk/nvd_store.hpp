// SPDX-License-Identifier: Apache-2.0
/**
 * @file nvd_store.hpp
 * @brief Local mirror of NVD CVE records with CVSS v2 completeness tagging.
 *
 * On disk a store is a directory holding `records.ndjson` (one JSON record per
 * line, sorted by CVE id) and `index.tsv` (CVE id and byte offset of its line).
 * Writers hold an exclusive lock on `store.lock`; loaders take a shared lock.
 */
#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vulnrisk/cvss.hpp"

namespace vulnrisk::nvd {

struct CveRecord {
    std::string cve_id;
    std::string description;
    cvss::Cvss2Vector vector;
    std::string published_date;

    /// 1 when every CVSS v2 base metric is present, 0 otherwise.
    [[nodiscard]] int completeness_tag() const noexcept { return vector.is_complete() ? 1 : 0; }

    friend bool operator==(const CveRecord&, const CveRecord&) = default;
};

enum class FeedFormat {
    NvdApi2Json,     ///< NVD REST API 2.0 response ("vulnerabilities" array)
    LegacyFeedJson,  ///< NVD 1.1 data feed ("CVE_Items" array)
};

std::string_view feed_format_name(FeedFormat format) noexcept;
/// Accepts "nvd-api-2.0-json" and "legacy-feed-json".
std::optional<FeedFormat> parse_feed_format(std::string_view name) noexcept;

struct RejectedRecord {
    std::string cve_id;  ///< may be empty when the entry carried no id
    std::string reason;
};

struct ParsedFeed {
    std::vector<CveRecord> records;
    std::vector<RejectedRecord> rejected;
    std::size_t entries = 0;  ///< entries seen in the feed
};

/// Parses a feed document. Throws Error(Schema) when the document is not JSON
/// or lacks the top-level array of the declared format. Entries with no
/// usable description, a bad id or a corrupt vector are rejected, not fatal.
ParsedFeed parse_feed(std::string_view text, FeedFormat format);
/// Guesses the format from the top-level keys; throws Error(Schema).
FeedFormat detect_feed_format(std::string_view text);

enum class ReplacePolicy {
    Replace,  ///< a re-ingested id overwrites the stored record
    Reject,   ///< a differing re-ingested id raises DuplicateConflict
};

struct IngestReport {
    std::size_t entries = 0;
    std::size_t ingested = 0;  ///< records stored (inserted + replaced + unchanged)
    std::size_t inserted = 0;
    std::size_t replaced = 0;
    std::size_t unchanged = 0;
    std::vector<RejectedRecord> rejected;
};

struct StoreStats {
    std::size_t total = 0;
    std::size_t available = 0;
    std::size_t unavailable = 0;
    double percent_unavailable = 0.0;
};

StoreStats compute_stats(std::size_t available, std::size_t unavailable) noexcept;

/// CSV header and row text for the export format. Missing metrics are "NF".
std::string export_csv_header();
std::string export_csv_row(const CveRecord& record);

class NvdStore {
public:
    /// Opens (creating if needed) a store directory and loads its records.
    static NvdStore open(const std::filesystem::path& dir);
    /// A store that is never persisted.
    static NvdStore in_memory();

    NvdStore(NvdStore&&) noexcept;
    NvdStore& operator=(NvdStore&&) noexcept;
    ~NvdStore();

    IngestReport ingest_feed(const std::filesystem::path& path, FeedFormat format,
                             ReplacePolicy policy = ReplacePolicy::Replace);
    IngestReport ingest_records(std::vector<CveRecord> records, ReplacePolicy policy = ReplacePolicy::Replace);
    /// Stores the records of an already parsed feed; its rejects are carried into the report.
    IngestReport ingest_parsed(ParsedFeed feed, ReplacePolicy policy = ReplacePolicy::Replace);

    /// Exact-match lookup; nullopt means the id is not mirrored.
    [[nodiscard]] std::optional<CveRecord> lookup(std::string_view cve_id) const;
    [[nodiscard]] StoreStats stats() const;
    [[nodiscard]] std::size_t size() const;
    /// All records sorted by id.
    [[nodiscard]] std::vector<CveRecord> records() const;
    void for_each(const std::function<void(const CveRecord&)>& fn) const;

    [[nodiscard]] std::string export_csv() const;
    /// Persists to the store directory (no-op for in-memory stores).
    void save() const;

    [[nodiscard]] const std::optional<std::filesystem::path>& directory() const noexcept;

private:
    struct Impl;
    explicit NvdStore(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

/// JSON line used in records.ndjson. Exposed for tests and tooling.
std::string serialize_record(const CveRecord& record);
CveRecord deserialize_record(std::string_view line);

}  // namespace vulnrisk::nvd
