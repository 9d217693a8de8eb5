// SPDX-License-Identifier: Apache-2.0
// Optional live ingest source: the NVD CVE API 2.0 over HTTP(S).
#pragma once

#include <chrono>
#include <cstddef>
#include <string>

#include "vulnrisk/nvd_store.hpp"

namespace vulnrisk::nvd {

struct ApiClientOptions {
    std::string base_url = "https://services.nvd.nist.gov";
    std::string path = "/rest/json/cves/2.0";
    std::string api_key;  ///< sent as the apiKey header when set
    std::size_t results_per_page = 2000;
    std::size_t max_records = 0;  ///< 0 fetches everything
    /// Optional lastModStartDate/lastModEndDate window for incremental refresh.
    std::string last_modified_start;
    std::string last_modified_end;
    std::size_t max_retries = 5;
    /// Doubles on each retry; a Retry-After header overrides it.
    std::chrono::milliseconds backoff{6000};
    std::chrono::milliseconds request_timeout{30000};
};

struct ApiFetch {
    ParsedFeed feed;
    std::size_t pages = 0;
    std::size_t retries = 0;
};

/// Pages through the API with startIndex/resultsPerPage. Retries 403, 429,
/// 503 and connection failures; throws Io when retries run out or on any
/// other HTTP status, and Schema for unparseable pages.
ApiFetch fetch_from_api(const ApiClientOptions& options);

}  // namespace vulnrisk::nvd
