// SPDX-License-Identifier: Apache-2.0
#include "vulnrisk/risk.hpp"

#include <algorithm>

#include "json.hpp"
#include "vulnrisk/common.hpp"
#include "vulnrisk/csv.hpp"
#include "vulnrisk/error.hpp"
#include "vulnrisk/taxonomy.hpp"

namespace vulnrisk::risk {

std::size_t AssessedCve::predicted_count() const noexcept {
    return static_cast<std::size_t>(std::count(provenance.begin(), provenance.end(), Provenance::Predicted));
}

AssessedCve assess(const nvd::CveRecord& record, const impute::Prediction* prediction) {
    if (prediction != nullptr && prediction->cve_id != record.cve_id) {
        throw Error(ErrorCode::Domain, "prediction for " + prediction->cve_id + " applied to " + record.cve_id);
    }
    AssessedCve out;
    out.cve_id = record.cve_id;
    for (auto metric : cvss::kAllMetrics) {
        const auto m = static_cast<std::size_t>(metric);
        if (const auto label = record.vector.get(metric)) {
            out.resolved_vector.set(metric, label);
            out.provenance[m] = Provenance::GroundTruth;
        } else if (prediction != nullptr) {
            out.resolved_vector.set(metric, prediction->at(metric).label);
            out.provenance[m] = Provenance::Predicted;
        } else {
            throw Error(ErrorCode::UnresolvableMetric,
                        record.cve_id + ": " + std::string(cvss::metric_name(metric)) + " is missing and no prediction was supplied");
        }
    }
    out.low_confidence = out.imputed() && prediction != nullptr && prediction->low_confidence;
    out.scores = cvss::score(out.resolved_vector);
    return out;
}

ComponentRisk aggregate(std::string component, std::vector<AssessedCve> assessed) {
    if (assessed.empty()) throw Error(ErrorCode::EmptyComponent, "component '" + component + "' has no assessed CVEs");
    std::sort(assessed.begin(), assessed.end(), [](const auto& a, const auto& b) { return a.cve_id < b.cve_id; });
    ComponentRisk out;
    out.component = std::move(component);
    out.n_cves = assessed.size();
    // Summing in id order keeps the means independent of input order.
    for (const auto& cve : assessed) {
        out.mean_impact += cve.scores.impact;
        out.mean_exploitability += cve.scores.exploitability;
        out.mean_base += cve.scores.base;
        out.max_base = std::max(out.max_base, cve.scores.base);
        if (cve.imputed()) ++out.n_imputed;
    }
    const auto n = static_cast<double>(out.n_cves);
    out.mean_impact /= n;
    out.mean_exploitability /= n;
    out.mean_base /= n;
    out.cves = std::move(assessed);
    return out;
}

AssessmentResult assess_scan(const scan::ScanReport& report, const nvd::NvdStore& store,
                             const std::unordered_map<std::string, impute::Prediction>& predictions,
                             const taxonomy::Tagger* tagger) {
    AssessmentResult result;
    for (const auto& group : scan::components(report)) {
        std::vector<AssessedCve> assessed;
        for (const auto& id : group.cve_ids) {
            const auto record = store.lookup(id);
            if (!record) {
                result.not_found.emplace_back(group.component, id);
                continue;
            }
            const auto it = predictions.find(id);
            auto cve = assess(*record, it == predictions.end() || record->vector.is_complete() ? nullptr : &it->second);
            if (tagger != nullptr) {
                for (const auto& node : tagger->tag(record->description)) cve.taxonomy_tags.push_back(node.id);
            }
            assessed.push_back(std::move(cve));
        }
        if (!assessed.empty()) result.components.push_back(aggregate(group.component, std::move(assessed)));
    }
    return result;
}

std::string components_csv(const AssessmentResult& result) {
    std::string out = csv::format_row(
        {"component", "n_cves", "n_imputed", "mean_impact", "mean_exploitability", "mean_base", "max_base"});
    for (const auto& c : result.components) {
        out += csv::format_row({c.component, std::to_string(c.n_cves), std::to_string(c.n_imputed),
                                format_fixed(c.mean_impact, 4), format_fixed(c.mean_exploitability, 4),
                                format_fixed(c.mean_base, 4), format_fixed(c.max_base, 1)});
    }
    return out;
}

std::string components_json(const AssessmentResult& result) {
    nlohmann::ordered_json doc;
    auto& components = doc["components"] = nlohmann::ordered_json::array();
    for (const auto& c : result.components) {
        nlohmann::ordered_json row;
        row["component"] = c.component;
        row["n_cves"] = c.n_cves;
        row["n_imputed"] = c.n_imputed;
        row["mean_impact"] = c.mean_impact;
        row["mean_exploitability"] = c.mean_exploitability;
        row["mean_base"] = c.mean_base;
        row["max_base"] = c.max_base;
        components.push_back(std::move(row));
    }
    auto& missing = doc["not_found"] = nlohmann::ordered_json::array();
    for (const auto& [component, id] : result.not_found) missing.push_back({{"component", component}, {"cve_id", id}});
    return doc.dump(2) + "\n";
}

std::string cves_csv(const AssessmentResult& result) {
    std::vector<std::string> header{"component", "cve_id", "vector", "impact", "exploitability", "base"};
    for (auto metric : cvss::kAllMetrics) header.push_back(std::string(cvss::metric_key(metric)) + "_provenance");
    header.emplace_back("low_confidence");
    header.emplace_back("taxonomy");
    std::string out = csv::format_row(header);
    for (const auto& c : result.components) {
        for (const auto& cve : c.cves) {
            std::vector<std::string> row{c.component,
                                         cve.cve_id,
                                         cve.resolved_vector.to_string(),
                                         format_fixed(cve.scores.impact, 4),
                                         format_fixed(cve.scores.exploitability, 4),
                                         format_fixed(cve.scores.base, 1)};
            for (auto p : cve.provenance) row.emplace_back(p == Provenance::GroundTruth ? "ground-truth" : "predicted");
            row.emplace_back(cve.low_confidence ? "1" : "0");
            std::string tags;
            for (const auto& t : cve.taxonomy_tags) tags += (tags.empty() ? "" : ";") + t;
            row.push_back(std::move(tags));
            out += csv::format_row(row);
        }
    }
    return out;
}

}  // namespace vulnrisk::risk
