// SPDX-License-Identifier: Apache-2.0
/**
 * @file imputer.hpp
 * @brief Shared pieces of CVSS v2 metric imputation.
 *
 * Each of the six metrics is an independent three-class task. Class imbalance
 * is countered with per-label weights w_i = N / F_i applied inside the
 * cross-entropy loss. Concrete imputers (the built-in baseline, the external
 * model client, the perfect oracle used in tests) share the Imputer interface.
 */
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vulnrisk/cvss.hpp"

namespace vulnrisk::impute {

struct LabelWeights {
    std::size_t n_total = 0;
    std::vector<std::size_t> frequencies;         ///< F_i per class index
    std::vector<std::optional<double>> weights;   ///< N / F_i, empty when F_i = 0

    [[nodiscard]] bool present(std::size_t cls) const { return frequencies.at(cls) > 0; }
    [[nodiscard]] std::size_t num_classes() const noexcept { return frequencies.size(); }
    /// Absent labels map to 0 so they contribute nothing to the loss.
    [[nodiscard]] std::vector<double> dense() const;
};

/// Class indices must be < num_classes. Throws EmptyDataset on empty input
/// and Domain on an out-of-range class.
LabelWeights compute_label_weights(std::span<const std::size_t> labels, std::size_t num_classes);
LabelWeights compute_label_weights(cvss::Metric metric, std::span<const cvss::Label> labels);

/// Probability floor applied to the true class before taking the log.
inline constexpr double kProbabilityFloor = 1e-12;

/// -w_true * log(p_true). Probabilities must be non-negative and sum to 1
/// within 1e-6, and p_true must be positive; otherwise throws Domain.
double weighted_cross_entropy(std::span<const double> probabilities, std::size_t true_class,
                              std::span<const double> class_weights);

enum class PredictionSource { Baseline, ExternalModel, GroundTruth };

std::string_view prediction_source_name(PredictionSource source) noexcept;

struct MetricPrediction {
    cvss::Label label = cvss::Label::None;
    double confidence = 0.0;  ///< top-class probability in [0, 1]

    friend bool operator==(const MetricPrediction&, const MetricPrediction&) = default;
};

struct Prediction {
    std::string cve_id;
    std::array<MetricPrediction, cvss::kMetricCount> metrics{};
    PredictionSource source = PredictionSource::Baseline;
    bool low_confidence = false;

    [[nodiscard]] const MetricPrediction& at(cvss::Metric metric) const {
        return metrics[static_cast<std::size_t>(metric)];
    }
    [[nodiscard]] cvss::Cvss2Vector vector() const;

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// One line of predictions.jsonl.
std::string prediction_to_json(const Prediction& prediction);
/// Throws Error(Schema) on malformed lines, IllegalLabel on out-of-set labels.
Prediction prediction_from_json(std::string_view line);

struct PredictRequest {
    std::string cve_id;
    std::string description;
};

class Imputer {
public:
    virtual ~Imputer() = default;

    [[nodiscard]] virtual std::string_view name() const noexcept = 0;
    virtual Prediction predict(const std::string& cve_id, const std::string& description) const = 0;
    /// Order-preserving. The default fans out over up to `workers` threads,
    /// which requires predict() to be safe for concurrent calls.
    virtual std::vector<Prediction> predict_batch(std::span<const PredictRequest> requests, std::size_t workers) const;
};

/// Returns the known true vector of a CVE. Exists for the masking
/// experiment's identity check: with this imputer every error is zero.
class PerfectOracle final : public Imputer {
public:
    explicit PerfectOracle(std::unordered_map<std::string, cvss::Cvss2Vector> truth);

    [[nodiscard]] std::string_view name() const noexcept override { return "perfect-oracle"; }
    /// Throws UnresolvableMetric when the id has no complete true vector.
    Prediction predict(const std::string& cve_id, const std::string& description) const override;

private:
    std::unordered_map<std::string, cvss::Cvss2Vector> truth_;
};

}  // namespace vulnrisk::impute
