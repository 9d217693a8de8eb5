// SPDX-License-Identifier: Apache-2.0
#include "vulnrisk/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "vulnrisk/common.hpp"
#include "vulnrisk/csv.hpp"
#include "vulnrisk/error.hpp"
#include "vulnrisk/risk.hpp"

namespace vulnrisk::eval {
namespace {

std::size_t floor_share(double ratio, std::size_t n) {
    // The epsilon keeps 0.1 * 176740 = 17674.000000000004 and friends exact.
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::optional<double> mean_of(const std::vector<double>& values) {
    if (values.empty()) return std::nullopt;
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

std::string optional_cell(const std::optional<double>& value) {
    return value ? format_fixed(*value, 4) : std::string{};
}

nlohmann::ordered_json optional_json(const std::optional<double>& value) {
    return value ? nlohmann::ordered_json(*value) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json scores_json(const cvss::ScoreTriple& s) {
    nlohmann::ordered_json out;
    out["impact"] = s.impact;
    out["exploitability"] = s.exploitability;
    out["base"] = s.base;
    return out;
}

}  // namespace

SplitIndices split_indices(std::size_t n, const SplitRatios& ratios, std::uint64_t seed) {
    if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 ||
        std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
        throw Error(ErrorCode::Domain, "split ratios must be non-negative and sum to 1");
    }
    const auto order = shuffled_indices(n, seed);
    const auto n_val = floor_share(ratios.validation, n);
    const auto n_test = floor_share(ratios.test, n);
    const auto n_train = n - n_val - n_test;
    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                          order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    return out;
}

ClassificationReport classification_metrics(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                            std::size_t num_classes) {
    if (truth.size() != predicted.size() || truth.empty()) {
        throw Error(ErrorCode::LengthMismatch, "label sequences must be non-empty and of equal length (" +
                                                   std::to_string(truth.size()) + " vs " + std::to_string(predicted.size()) + ")");
    }
    ClassificationReport report;
    report.num_classes = num_classes;
    report.samples = truth.size();
    report.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= num_classes || predicted[i] >= num_classes) throw Error(ErrorCode::Domain, "class index out of range");
        ++report.confusion[truth[i]][predicted[i]];
    }

    const auto n = static_cast<double>(truth.size());
    std::size_t correct = 0;
    double total_fp = 0.0;
    double total_fn = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        double tp = static_cast<double>(report.confusion[c][c]);
        double support = 0.0;
        double predicted_c = 0.0;
        for (std::size_t k = 0; k < num_classes; ++k) {
            support += static_cast<double>(report.confusion[c][k]);
            predicted_c += static_cast<double>(report.confusion[k][c]);
        }
        correct += report.confusion[c][c];
        total_fp += predicted_c - tp;
        total_fn += support - tp;
        const double precision = safe_div(tp, predicted_c);
        const double recall = safe_div(tp, support);
        const double f1 = safe_div(2.0 * precision * recall, precision + recall);
        const double share = support / n;
        report.precision_weighted += share * precision;
        report.recall_weighted += share * recall;
        report.f1_weighted += share * f1;
    }
    const double tp_total = static_cast<double>(correct);
    report.accuracy = tp_total / n;
    const double micro_p = safe_div(tp_total, tp_total + total_fp);
    const double micro_r = safe_div(tp_total, tp_total + total_fn);
    report.f1_micro = safe_div(2.0 * micro_p * micro_r, micro_p + micro_r);
    return report;
}

std::optional<double> percentage_error(double true_value, double predicted_value) noexcept {
    if (true_value == 0.0) return std::nullopt;
    return std::abs((true_value - predicted_value) / true_value) * 100.0;
}

std::size_t masked_count(std::size_t n, double mask_fraction) noexcept {
    if (mask_fraction <= 0.0) return 0;
    // Tolerance guards against 0.3 * 10 = 3.0000000000000004 rounding up to 4.
    const auto k = static_cast<std::size_t>(std::ceil(mask_fraction * static_cast<double>(n) - 1e-9));
    return std::min(k, n);
}

MaskingResult masking_experiment(const std::vector<ComponentRecords>& groups, double mask_fraction, std::uint64_t seed,
                                 const impute::Imputer& imputer, std::size_t workers) {
    if (!(mask_fraction >= 0.0 && mask_fraction < 1.0)) throw Error(ErrorCode::Domain, "mask fraction must lie in [0, 1)");
    MaskingResult result;
    result.mask_fraction = mask_fraction;
    result.seed = seed;

    struct Pending {
        std::size_t row;
        const nvd::CveRecord* record;
    };
    std::vector<Pending> pending;
    std::vector<impute::PredictRequest> requests;

    for (const auto& group : groups) {
        for (const auto& record : group.records) {
            if (!record.vector.is_complete()) {
                throw Error(ErrorCode::Domain, record.cve_id + " has no complete vector and cannot serve as ground truth");
            }
        }
        if (group.records.size() < 2) {
            result.skipped.push_back({group.component, "InsufficientData: fewer than 2 records"});
            continue;
        }
        ErrorBiasRow row;
        row.component = group.component;
        row.n_records = group.records.size();
        row.n_masked = masked_count(group.records.size(), mask_fraction);
        const auto order = shuffled_indices(group.records.size(), seed ^ fnv1a64(group.component));
        std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(row.n_masked));
        std::sort(chosen.begin(), chosen.end());
        for (auto i : chosen) {
            pending.push_back({result.rows.size(), &group.records[i]});
            requests.push_back({group.records[i].cve_id, group.records[i].description});
        }
        result.rows.push_back(std::move(row));
    }

    const auto predictions = imputer.predict_batch(requests, workers);

    struct Accumulator {
        std::vector<double> impact_err, exploit_err, base_err;
        double impact_bias = 0.0, exploit_bias = 0.0, base_bias = 0.0;
    };
    std::vector<Accumulator> acc(result.rows.size());

    for (std::size_t p = 0; p < pending.size(); ++p) {
        const auto& record = *pending[p].record;
        nvd::CveRecord hidden = record;
        hidden.vector = cvss::Cvss2Vector{};
        const auto assessed = risk::assess(hidden, predictions[p]);

        MaskedCve cve;
        cve.component = result.rows[pending[p].row].component;
        cve.cve_id = record.cve_id;
        cve.true_vector = record.vector;
        cve.imputed_vector = assessed.resolved_vector;
        cve.true_scores = cvss::score(record.vector);
        cve.imputed_scores = assessed.scores;
        cve.impact_error_pct = percentage_error(cve.true_scores.impact, cve.imputed_scores.impact);
        cve.exploitability_error_pct = percentage_error(cve.true_scores.exploitability, cve.imputed_scores.exploitability);
        cve.base_error_pct = percentage_error(cve.true_scores.base, cve.imputed_scores.base);
        cve.impact_bias = bias(cve.true_scores.impact, cve.imputed_scores.impact);
        cve.exploitability_bias = bias(cve.true_scores.exploitability, cve.imputed_scores.exploitability);
        cve.base_bias = bias(cve.true_scores.base, cve.imputed_scores.base);

        auto& a = acc[pending[p].row];
        const auto collect = [](const std::optional<double>& value, std::vector<double>& into, std::size_t& zero_counter) {
            if (value) {
                into.push_back(*value);
            } else {
                ++zero_counter;
            }
        };
        collect(cve.impact_error_pct, a.impact_err, result.zero_true_excluded.impact);
        collect(cve.exploitability_error_pct, a.exploit_err, result.zero_true_excluded.exploitability);
        collect(cve.base_error_pct, a.base_err, result.zero_true_excluded.base);
        a.impact_bias += cve.impact_bias;
        a.exploit_bias += cve.exploitability_bias;
        a.base_bias += cve.base_bias;
        result.cves.push_back(std::move(cve));
    }

    for (std::size_t r = 0; r < result.rows.size(); ++r) {
        auto& row = result.rows[r];
        const auto& a = acc[r];
        row.impact_error_pct = mean_of(a.impact_err);
        row.exploitability_error_pct = mean_of(a.exploit_err);
        row.base_error_pct = mean_of(a.base_err);
        if (row.n_masked > 0) {
            const auto n = static_cast<double>(row.n_masked);
            row.impact_bias = a.impact_bias / n;
            row.exploitability_bias = a.exploit_bias / n;
            row.base_bias = a.base_bias / n;
        }
    }
    return result;
}

std::string error_table_csv(const MaskingResult& result) {
    std::string out = csv::format_row({"component", "impact_error_pct", "exploitability_error_pct", "base_error_pct"});
    for (const auto& row : result.rows) {
        out += csv::format_row({row.component, optional_cell(row.impact_error_pct),
                                optional_cell(row.exploitability_error_pct), optional_cell(row.base_error_pct)});
    }
    return out;
}

std::string bias_table_csv(const MaskingResult& result) {
    std::string out = csv::format_row({"component", "impact_bias", "exploitability_bias", "base_bias"});
    for (const auto& row : result.rows) {
        out += csv::format_row({row.component, format_fixed(row.impact_bias, 4), format_fixed(row.exploitability_bias, 4),
                                format_fixed(row.base_bias, 4)});
    }
    return out;
}

std::string masking_json(const MaskingResult& result) {
    nlohmann::ordered_json doc;
    doc["mask_fraction"] = result.mask_fraction;
    doc["seed"] = result.seed;
    doc["zero_true_excluded"] = {{"impact", result.zero_true_excluded.impact},
                                 {"exploitability", result.zero_true_excluded.exploitability},
                                 {"base", result.zero_true_excluded.base}};
    auto& skipped = doc["skipped_components"] = nlohmann::ordered_json::array();
    for (const auto& s : result.skipped) skipped.push_back({{"component", s.component}, {"reason", s.reason}});
    auto& rows = doc["components"] = nlohmann::ordered_json::array();
    for (const auto& row : result.rows) {
        nlohmann::ordered_json r;
        r["component"] = row.component;
        r["n_records"] = row.n_records;
        r["n_masked"] = row.n_masked;
        r["impact_error_pct"] = optional_json(row.impact_error_pct);
        r["exploitability_error_pct"] = optional_json(row.exploitability_error_pct);
        r["base_error_pct"] = optional_json(row.base_error_pct);
        r["impact_bias"] = row.impact_bias;
        r["exploitability_bias"] = row.exploitability_bias;
        r["base_bias"] = row.base_bias;
        rows.push_back(std::move(r));
    }
    auto& cves = doc["cves"] = nlohmann::ordered_json::array();
    for (const auto& cve : result.cves) {
        nlohmann::ordered_json c;
        c["component"] = cve.component;
        c["cve_id"] = cve.cve_id;
        c["true_vector"] = cve.true_vector.to_string();
        c["imputed_vector"] = cve.imputed_vector.to_string();
        c["true_scores"] = scores_json(cve.true_scores);
        c["imputed_scores"] = scores_json(cve.imputed_scores);
        c["impact_error_pct"] = optional_json(cve.impact_error_pct);
        c["exploitability_error_pct"] = optional_json(cve.exploitability_error_pct);
        c["base_error_pct"] = optional_json(cve.base_error_pct);
        c["impact_bias"] = cve.impact_bias;
        c["exploitability_bias"] = cve.exploitability_bias;
        c["base_bias"] = cve.base_bias;
        cves.push_back(std::move(c));
    }
    return doc.dump(2) + "\n";
}

}  // namespace vulnrisk::eval
