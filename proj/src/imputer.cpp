// SPDX-License-Identifier: Apache-2.0
#include "vulnrisk/imputer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "vulnrisk/error.hpp"

namespace vulnrisk::impute {

std::vector<double> LabelWeights::dense() const {
    std::vector<double> out(weights.size(), 0.0);
    for (std::size_t i = 0; i < weights.size(); ++i) out[i] = weights[i].value_or(0.0);
    return out;
}

LabelWeights compute_label_weights(std::span<const std::size_t> labels, std::size_t num_classes) {
    if (labels.empty()) throw Error(ErrorCode::EmptyDataset, "cannot compute label weights of an empty dataset");
    LabelWeights out;
    out.n_total = labels.size();
    out.frequencies.assign(num_classes, 0);
    for (auto cls : labels) {
        if (cls >= num_classes) throw Error(ErrorCode::Domain, "class index out of range");
        ++out.frequencies[cls];
    }
    out.weights.resize(num_classes);
    for (std::size_t i = 0; i < num_classes; ++i) {
        if (out.frequencies[i] > 0) {
            out.weights[i] = static_cast<double>(out.n_total) / static_cast<double>(out.frequencies[i]);
        }
    }
    return out;
}

LabelWeights compute_label_weights(cvss::Metric metric, std::span<const cvss::Label> labels) {
    std::vector<std::size_t> classes;
    classes.reserve(labels.size());
    for (auto label : labels) classes.push_back(cvss::class_index(metric, label));
    return compute_label_weights(classes, cvss::kLabelsPerMetric);
}

double weighted_cross_entropy(std::span<const double> probabilities, std::size_t true_class,
                              std::span<const double> class_weights) {
    if (true_class >= probabilities.size() || class_weights.size() != probabilities.size()) {
        throw Error(ErrorCode::Domain, "true class or weights do not match the probability vector");
    }
    double sum = 0.0;
    for (double p : probabilities) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorCode::Domain, "probabilities must be finite and non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::Domain, "probabilities must sum to 1");
    const double p_true = probabilities[true_class];
    if (!(p_true > 0.0)) throw Error(ErrorCode::Domain, "true-class probability must be positive");
    return -class_weights[true_class] * std::log(std::max(p_true, kProbabilityFloor));
}

std::string_view prediction_source_name(PredictionSource source) noexcept {
    switch (source) {
        case PredictionSource::Baseline: return "baseline";
        case PredictionSource::ExternalModel: return "external-model";
        case PredictionSource::GroundTruth: return "ground-truth";
    }
    return "unknown";
}

cvss::Cvss2Vector Prediction::vector() const {
    cvss::Cvss2Vector v;
    for (auto metric : cvss::kAllMetrics) v.set(metric, at(metric).label);
    return v;
}

std::string prediction_to_json(const Prediction& prediction) {
    nlohmann::ordered_json labels;
    nlohmann::ordered_json confidences;
    for (auto metric : cvss::kAllMetrics) {
        const auto key = std::string(cvss::metric_key(metric));
        labels[key] = std::string(cvss::label_text(prediction.at(metric).label));
        confidences[key] = prediction.at(metric).confidence;
    }
    nlohmann::ordered_json doc;
    doc["cve_id"] = prediction.cve_id;
    doc["source"] = prediction_source_name(prediction.source);
    doc["low_confidence"] = prediction.low_confidence;
    doc["labels"] = std::move(labels);
    doc["confidences"] = std::move(confidences);
    return doc.dump();
}

Prediction prediction_from_json(std::string_view line) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::Schema, std::string("malformed prediction line: ") + e.what());
    }
    try {
        Prediction out;
        out.cve_id = doc.at("cve_id").get<std::string>();
        const auto source = doc.at("source").get<std::string>();
        if (source == "baseline") {
            out.source = PredictionSource::Baseline;
        } else if (source == "external-model") {
            out.source = PredictionSource::ExternalModel;
        } else if (source == "ground-truth") {
            out.source = PredictionSource::GroundTruth;
        } else {
            throw Error(ErrorCode::Schema, "unknown prediction source '" + source + "'");
        }
        out.low_confidence = doc.value("low_confidence", false);
        for (auto metric : cvss::kAllMetrics) {
            const auto key = std::string(cvss::metric_key(metric));
            const auto text = doc.at("labels").at(key).get<std::string>();
            const auto label = cvss::parse_label(metric, text);
            if (!label) throw Error(ErrorCode::IllegalLabel, "'" + text + "' is not a legal " + key + " label");
            auto& slot = out.metrics[static_cast<std::size_t>(metric)];
            slot.label = *label;
            slot.confidence = doc.at("confidences").at(key).get<double>();
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("malformed prediction line: ") + e.what());
    }
}

std::vector<Prediction> Imputer::predict_batch(std::span<const PredictRequest> requests, std::size_t workers) const {
    std::vector<Prediction> out(requests.size());
    const auto threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(requests.size(), 1));
    if (threads == 1) {
        for (std::size_t i = 0; i < requests.size(); ++i) out[i] = predict(requests[i].cve_id, requests[i].description);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (auto i = next++; i < requests.size(); i = next++) {
                    try {
                        out[i] = predict(requests[i].cve_id, requests[i].description);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

PerfectOracle::PerfectOracle(std::unordered_map<std::string, cvss::Cvss2Vector> truth) : truth_(std::move(truth)) {}

Prediction PerfectOracle::predict(const std::string& cve_id, const std::string&) const {
    const auto it = truth_.find(cve_id);
    if (it == truth_.end() || !it->second.is_complete()) {
        throw Error(ErrorCode::UnresolvableMetric, "perfect oracle has no complete vector for " + cve_id);
    }
    Prediction out;
    out.cve_id = cve_id;
    out.source = PredictionSource::GroundTruth;
    for (auto metric : cvss::kAllMetrics) out.metrics[static_cast<std::size_t>(metric)] = {*it->second.get(metric), 1.0};
    return out;
}

}  // namespace vulnrisk::impute
