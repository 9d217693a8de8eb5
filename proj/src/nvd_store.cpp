// SPDX-License-Identifier: Apache-2.0
#include "vulnrisk/nvd_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>

#include "json.hpp"
#include "vulnrisk/common.hpp"
#include "vulnrisk/csv.hpp"
#include "vulnrisk/error.hpp"

namespace vulnrisk::nvd {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kRecordsFile = "records.ndjson";
constexpr const char* kIndexFile = "index.tsv";
constexpr const char* kLockFile = "store.lock";

// flock()-based advisory lock held for the lifetime of the object.
class FileLock {
public:
    FileLock(const fs::path& path, bool exclusive) {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) throw Error(ErrorCode::Io, "cannot open lock file " + path.string());
        if (::flock(fd_, exclusive ? LOCK_EX : LOCK_SH) != 0) {
            ::close(fd_);
            throw Error(ErrorCode::Io, "cannot lock " + path.string());
        }
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;
    ~FileLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }

private:
    int fd_ = -1;
};

}  // namespace

std::string serialize_record(const CveRecord& record) {
    // ordered_json keeps a fixed key order so store files diff cleanly.
    nlohmann::ordered_json vector;
    for (auto metric : cvss::kAllMetrics) {
        const auto label = record.vector.get(metric);
        vector[std::string(cvss::metric_key(metric))] =
            label ? nlohmann::ordered_json(std::string(1, cvss::label_code(metric, *label))) : nullptr;
    }
    nlohmann::ordered_json line;
    line["cve_id"] = record.cve_id;
    line["published"] = record.published_date;
    line["completeness_tag"] = record.completeness_tag();
    line["cvss2"] = std::move(vector);
    line["description"] = record.description;
    return line.dump();
}

CveRecord deserialize_record(std::string_view line) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Schema, std::string("corrupt store record: ") + e.what());
    }
    try {
        CveRecord record;
        record.cve_id = doc.at("cve_id").get<std::string>();
        record.description = doc.at("description").get<std::string>();
        record.published_date = doc.value("published", std::string{});
        const auto& vector = doc.at("cvss2");
        for (auto metric : cvss::kAllMetrics) {
            const auto& value = vector.at(std::string(cvss::metric_key(metric)));
            if (value.is_null()) continue;
            const auto text = value.get<std::string>();
            const auto label = text.size() == 1 ? cvss::label_from_code(metric, text[0]) : std::nullopt;
            if (!label) throw Error(ErrorCode::Schema, "corrupt store record " + record.cve_id + ": bad label " + text);
            record.vector.set(metric, label);
        }
        if (doc.at("completeness_tag").get<int>() != record.completeness_tag()) {
            throw Error(ErrorCode::Schema, "store record " + record.cve_id + " has an inconsistent completeness tag");
        }
        return record;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("corrupt store record: ") + e.what());
    }
}

StoreStats compute_stats(std::size_t available, std::size_t unavailable) noexcept {
    StoreStats stats;
    stats.available = available;
    stats.unavailable = unavailable;
    stats.total = available + unavailable;
    stats.percent_unavailable =
        stats.total == 0 ? 0.0 : 100.0 * static_cast<double>(unavailable) / static_cast<double>(stats.total);
    return stats;
}

std::string export_csv_header() {
    std::vector<std::string> header{"cve_id", "description"};
    for (auto metric : cvss::kAllMetrics) header.emplace_back(cvss::metric_column(metric));
    header.emplace_back("completeness_tag");
    return csv::format_row(header);
}

std::string export_csv_row(const CveRecord& record) {
    std::vector<std::string> row{record.cve_id, record.description};
    for (auto metric : cvss::kAllMetrics) {
        const auto label = record.vector.get(metric);
        row.emplace_back(label ? std::string(cvss::label_text(*label)) : std::string("NF"));
    }
    row.push_back(std::to_string(record.completeness_tag()));
    return csv::format_row(row);
}

struct NvdStore::Impl {
    std::optional<fs::path> dir;
    std::map<std::string, CveRecord, std::less<>> records;
    mutable std::shared_mutex mutex;

    void load() {
        const auto path = *dir / kRecordsFile;
        if (!fs::exists(path)) return;
        FileLock lock(*dir / kLockFile, false);
        const auto text = read_file(path);
        std::size_t pos = 0;
        while (pos < text.size()) {
            auto end = text.find('\n', pos);
            if (end == std::string::npos) end = text.size();
            if (end > pos) {
                auto record = deserialize_record(std::string_view(text).substr(pos, end - pos));
                auto id = record.cve_id;
                records.insert_or_assign(std::move(id), std::move(record));
            }
            pos = end + 1;
        }
    }
};

NvdStore::NvdStore(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
NvdStore::NvdStore(NvdStore&&) noexcept = default;
NvdStore& NvdStore::operator=(NvdStore&&) noexcept = default;
NvdStore::~NvdStore() = default;

NvdStore NvdStore::open(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create store directory " + dir.string() + ": " + ec.message());
    auto impl = std::make_unique<Impl>();
    impl->dir = dir;
    impl->load();
    return NvdStore(std::move(impl));
}

NvdStore NvdStore::in_memory() { return NvdStore(std::make_unique<Impl>()); }

IngestReport NvdStore::ingest_feed(const fs::path& path, FeedFormat format, ReplacePolicy policy) {
    return ingest_parsed(parse_feed(read_file(path), format), policy);
}

IngestReport NvdStore::ingest_parsed(ParsedFeed parsed, ReplacePolicy policy) {
    auto report = ingest_records(std::move(parsed.records), policy);
    report.entries = parsed.entries;
    report.rejected.insert(report.rejected.begin(), parsed.rejected.begin(), parsed.rejected.end());
    return report;
}

IngestReport NvdStore::ingest_records(std::vector<CveRecord> records, ReplacePolicy policy) {
    IngestReport report;
    report.entries = records.size();
    for (auto& record : records) record.description = normalize_whitespace(record.description);
    {
        std::unique_lock guard(impl_->mutex);
        if (policy == ReplacePolicy::Reject) {
            for (const auto& record : records) {
                const auto it = impl_->records.find(record.cve_id);
                if (it != impl_->records.end() && it->second != record) {
                    throw Error(ErrorCode::DuplicateConflict, record.cve_id + " already stored with different content");
                }
            }
        }
        for (auto& record : records) {
            if (!is_valid_cve_id(record.cve_id)) {
                report.rejected.push_back({record.cve_id, "invalid CVE id"});
                continue;
            }
            if (record.description.empty()) {
                report.rejected.push_back({record.cve_id, "empty description"});
                continue;
            }
            const auto it = impl_->records.find(record.cve_id);
            if (it == impl_->records.end()) {
                ++report.inserted;
                auto id = record.cve_id;
                impl_->records.emplace(std::move(id), std::move(record));
            } else if (it->second == record) {
                ++report.unchanged;
            } else {
                ++report.replaced;
                it->second = std::move(record);
            }
        }
        report.ingested = report.inserted + report.replaced + report.unchanged;
    }
    save();
    return report;
}

std::optional<CveRecord> NvdStore::lookup(std::string_view cve_id) const {
    std::shared_lock guard(impl_->mutex);
    const auto it = impl_->records.find(cve_id);
    if (it == impl_->records.end()) return std::nullopt;
    return it->second;
}

StoreStats NvdStore::stats() const {
    std::shared_lock guard(impl_->mutex);
    std::size_t available = 0;
    for (const auto& [id, record] : impl_->records) available += static_cast<std::size_t>(record.completeness_tag());
    return compute_stats(available, impl_->records.size() - available);
}

std::size_t NvdStore::size() const {
    std::shared_lock guard(impl_->mutex);
    return impl_->records.size();
}

std::vector<CveRecord> NvdStore::records() const {
    std::shared_lock guard(impl_->mutex);
    std::vector<CveRecord> out;
    out.reserve(impl_->records.size());
    for (const auto& [id, record] : impl_->records) out.push_back(record);
    return out;
}

void NvdStore::for_each(const std::function<void(const CveRecord&)>& fn) const {
    std::shared_lock guard(impl_->mutex);
    for (const auto& [id, record] : impl_->records) fn(record);
}

std::string NvdStore::export_csv() const {
    std::shared_lock guard(impl_->mutex);
    std::string out = export_csv_header();
    for (const auto& [id, record] : impl_->records) out += export_csv_row(record);
    return out;
}

void NvdStore::save() const {
    if (!impl_->dir) return;
    std::shared_lock guard(impl_->mutex);
    std::string records;
    std::string index;
    for (const auto& [id, record] : impl_->records) {
        index += id + "\t" + std::to_string(records.size()) + "\n";
        records += serialize_record(record);
        records.push_back('\n');
    }
    FileLock lock(*impl_->dir / kLockFile, true);
    write_file_atomic(*impl_->dir / kRecordsFile, records);
    write_file_atomic(*impl_->dir / kIndexFile, index);
}

const std::optional<fs::path>& NvdStore::directory() const noexcept { return impl_->dir; }

}  // namespace vulnrisk::nvd
