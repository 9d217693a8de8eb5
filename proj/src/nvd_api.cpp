// SPDX-License-Identifier: Apache-2.0
#include "vulnrisk/nvd_api.hpp"

#include <algorithm>
#include <charconv>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "vulnrisk/error.hpp"

namespace vulnrisk::nvd {
namespace {

bool retryable(int status) { return status == 403 || status == 429 || status == 503; }

std::chrono::milliseconds retry_after(const httplib::Result& res, std::chrono::milliseconds fallback) {
    if (!res || !res->has_header("Retry-After")) return fallback;
    const auto value = res->get_header_value("Retry-After");
    long seconds = 0;
    const auto parsed = std::from_chars(value.data(), value.data() + value.size(), seconds);
    if (parsed.ec != std::errc{} || seconds < 0) return fallback;
    return std::chrono::seconds(seconds);
}

}  // namespace

ApiFetch fetch_from_api(const ApiClientOptions& options) {
    if (options.results_per_page == 0) throw Error(ErrorCode::Config, "results_per_page must be positive");
    httplib::Client client(options.base_url);
    if (!client.is_valid()) throw Error(ErrorCode::Config, "unsupported API base URL '" + options.base_url + "'");
    const auto timeout = std::chrono::duration_cast<std::chrono::seconds>(options.request_timeout);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    httplib::Headers headers;
    if (!options.api_key.empty()) headers.emplace("apiKey", options.api_key);

    ApiFetch out;
    std::size_t start = 0;
    std::size_t total = 0;
    do {
        httplib::Params params{{"startIndex", std::to_string(start)},
                               {"resultsPerPage", std::to_string(options.results_per_page)}};
        if (!options.last_modified_start.empty()) params.emplace("lastModStartDate", options.last_modified_start);
        if (!options.last_modified_end.empty()) params.emplace("lastModEndDate", options.last_modified_end);

        auto backoff = options.backoff;
        httplib::Result res;
        for (std::size_t attempt = 0;; ++attempt) {
            res = client.Get(options.path, params, headers);
            const bool ok = res && res->status == 200;
            if (ok) break;
            if (res && !retryable(res->status)) {
                throw Error(ErrorCode::Io, "NVD API answered HTTP " + std::to_string(res->status));
            }
            if (attempt >= options.max_retries) {
                throw Error(ErrorCode::Io, res ? "NVD API still answering HTTP " + std::to_string(res->status) +
                                                     " after " + std::to_string(attempt) + " retries"
                                               : "cannot reach NVD API at " + options.base_url + ": " +
                                                     httplib::to_string(res.error()));
            }
            ++out.retries;
            std::this_thread::sleep_for(retry_after(res, backoff));
            backoff *= 2;
        }

        auto page = parse_feed(res->body, FeedFormat::NvdApi2Json);
        ++out.pages;
        out.feed.entries += page.entries;
        std::move(page.records.begin(), page.records.end(), std::back_inserter(out.feed.records));
        std::move(page.rejected.begin(), page.rejected.end(), std::back_inserter(out.feed.rejected));

        const auto doc = nlohmann::json::parse(res->body);
        total = doc.value("totalResults", std::size_t{0});
        if (options.max_records != 0) total = std::min(total, options.max_records);
        if (page.entries == 0) break;
        start += page.entries;
    } while (start < total);

    if (options.max_records != 0 && out.feed.records.size() > options.max_records) {
        out.feed.records.resize(options.max_records);
    }
    return out;
}

}  // namespace vulnrisk::nvd
