// SPDX-License-Identifier: Apache-2.0
/**
 * @file risk.hpp
 * @brief Ground-truth/prediction merge, per-CVE scoring and per-component aggregation.
 */
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vulnrisk/cvss.hpp"
#include "vulnrisk/imputer.hpp"
#include "vulnrisk/nvd_store.hpp"
#include "vulnrisk/scan_ingest.hpp"

namespace vulnrisk::taxonomy {
class Tagger;
}

namespace vulnrisk::risk {

enum class Provenance { GroundTruth, Predicted };

struct AssessedCve {
    std::string cve_id;
    cvss::Cvss2Vector resolved_vector;  ///< always complete
    cvss::ScoreTriple scores;
    std::array<Provenance, cvss::kMetricCount> provenance{};
    bool low_confidence = false;
    std::vector<std::string> taxonomy_tags;  ///< advisory node ids, never used for scoring

    [[nodiscard]] std::size_t predicted_count() const noexcept;
    [[nodiscard]] bool imputed() const noexcept { return predicted_count() > 0; }
};

/// Resolves every metric, preferring the record's own labels. Throws
/// UnresolvableMetric when a metric is missing and no prediction is given,
/// Domain when the prediction belongs to another CVE.
AssessedCve assess(const nvd::CveRecord& record, const impute::Prediction* prediction = nullptr);
inline AssessedCve assess(const nvd::CveRecord& record, const impute::Prediction& prediction) {
    return assess(record, &prediction);
}

struct ComponentRisk {
    std::string component;
    std::size_t n_cves = 0;
    std::size_t n_imputed = 0;
    double mean_impact = 0.0;
    double mean_exploitability = 0.0;
    double mean_base = 0.0;
    double max_base = 0.0;
    std::vector<AssessedCve> cves;  ///< sorted by CVE id
};

/// Arithmetic means plus the maximum base score. Throws EmptyComponent.
ComponentRisk aggregate(std::string component, std::vector<AssessedCve> assessed);

struct AssessmentResult {
    std::vector<ComponentRisk> components;  ///< lexicographic by component
    /// Scanner-reported CVEs absent from the local mirror, per component.
    std::vector<std::pair<std::string, std::string>> not_found;
};

/// Assesses every finding of a scan against the store. Predictions are looked
/// up by CVE id and used only for records with missing metrics. A component
/// whose CVEs are all missing from the mirror is omitted from `components`.
AssessmentResult assess_scan(const scan::ScanReport& report, const nvd::NvdStore& store,
                             const std::unordered_map<std::string, impute::Prediction>& predictions,
                             const taxonomy::Tagger* tagger = nullptr);

std::string components_csv(const AssessmentResult& result);
std::string components_json(const AssessmentResult& result);
/// Per-CVE detail with per-metric provenance flags.
std::string cves_csv(const AssessmentResult& result);

}  // namespace vulnrisk::risk
