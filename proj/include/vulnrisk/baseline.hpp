// SPDX-License-Identifier: Apache-2.0
/**
 * @file baseline.hpp
 * @brief Built-in imputation model: one multinomial logistic regression per
 *        CVSS v2 metric over hashed bag-of-token features.
 *
 * Training minimizes the label-weighted cross-entropy (weights w_i = N / F_i
 * from the training split, reduced as a weighted mean per mini-batch) with
 * mini-batch SGD, a decaying learning rate and early stopping on validation
 * loss. Labels never seen in training are never predicted.
 */
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vulnrisk/cvss.hpp"
#include "vulnrisk/evaluation.hpp"
#include "vulnrisk/imputer.hpp"
#include "vulnrisk/nvd_store.hpp"
#include "vulnrisk/text.hpp"

namespace vulnrisk::impute {

struct TrainingExample {
    std::string id;
    text::TokenSeq tokens;
    std::array<cvss::Label, cvss::kMetricCount> labels{};
};

struct CorpusBuild {
    std::vector<TrainingExample> examples;
    std::size_t skipped_incomplete = 0;  ///< completeness tag 0, no labels to learn from
    std::size_t skipped_empty = 0;       ///< nothing left after preprocessing
};

/// Converts completeness-tag-1 records into training examples.
CorpusBuild build_corpus(const std::vector<nvd::CveRecord>& records, const text::StopWords& stop_words,
                         std::size_t max_tokens = text::kDefaultMaxTokens);

struct BaselineConfig {
    std::size_t feature_bits = 18;  ///< hashed feature space of 2^bits
    std::uint64_t hash_seed = 0x9ae16a3b2f90404fULL;
    bool bigrams = false;
    std::size_t max_tokens = text::kDefaultMaxTokens;
    double learning_rate = 0.1;
    double lr_decay = 0.05;  ///< lr_epoch = learning_rate / (1 + lr_decay * (epoch - 1))
    std::size_t batch_size = 8;
    std::size_t max_epochs = 40;
    std::size_t patience = 3;
    bool use_label_weights = true;
    std::uint64_t seed = 42;
    eval::SplitRatios ratios{};
    std::size_t workers = 1;  ///< tasks trained concurrently

    friend bool operator==(const BaselineConfig&, const BaselineConfig&) = default;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
};

struct TaskReport {
    cvss::Metric metric = cvss::Metric::AccessVector;
    bool degenerate = false;
    LabelWeights weights;
    std::vector<EpochStats> curve;
    std::size_t best_epoch = 0;
    /// Held-out results; empty test split leaves these zero.
    eval::ClassificationReport test_metrics;
    double majority_frequency = 0.0;  ///< share of the most frequent class in the test split
};

struct TrainingReport {
    std::array<TaskReport, cvss::kMetricCount> tasks{};
    std::size_t n_train = 0;
    std::size_t n_validation = 0;
    std::size_t n_test = 0;
    std::array<std::string, 3> split_fingerprints;  ///< train, validation, test id-set hashes
    std::vector<std::string> test_ids;
};

/// Hashed sparse feature vector: sorted unique indices with L2-normalized values.
struct FeatureVector {
    std::vector<std::uint32_t> index;
    std::vector<double> value;
};

struct TrainResult;

class BaselineModel {
public:
    BaselineModel() = default;

    [[nodiscard]] const BaselineConfig& config() const noexcept { return config_; }
    [[nodiscard]] const text::StopWords& stop_words() const noexcept { return stop_words_; }

    [[nodiscard]] FeatureVector features(const text::TokenSeq& tokens) const;
    /// Class probabilities in the metric's class-index order.
    [[nodiscard]] std::array<double, cvss::kLabelsPerMetric> probabilities(cvss::Metric metric,
                                                                           const FeatureVector& x) const;
    [[nodiscard]] Prediction predict_tokens(const std::string& cve_id, const text::TokenSeq& tokens) const;
    /// Throws EmptyAfterPreprocess.
    [[nodiscard]] Prediction predict(const std::string& cve_id, const std::string& description) const;

    /// Versioned plain-text form; doubles are written in shortest round-trip
    /// notation so a reload reproduces every parameter exactly.
    [[nodiscard]] std::string serialize() const;
    static BaselineModel deserialize(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static BaselineModel load(const std::filesystem::path& path);

    friend bool operator==(const BaselineModel&, const BaselineModel&) = default;

    struct TaskModel {
        bool degenerate = false;
        std::size_t constant_class = 0;
        std::array<bool, cvss::kLabelsPerMetric> present{};
        std::array<double, cvss::kLabelsPerMetric> bias{};
        std::vector<double> weights;  ///< feature-major: weights[f * 3 + c]

        friend bool operator==(const TaskModel&, const TaskModel&) = default;
    };

private:
    friend struct Trainer;
    friend TrainResult train_baseline(const std::vector<TrainingExample>&, const BaselineConfig&,
                                      const text::StopWords&);

    BaselineConfig config_;
    text::StopWords stop_words_;
    std::array<TaskModel, cvss::kMetricCount> tasks_{};
};

struct TrainResult {
    BaselineModel model;
    TrainingReport report;
};

/// Splits the corpus 80/10/10 (config ratios, config seed), trains the six
/// tasks and evaluates them on the test split. Throws EmptyDataset.
TrainResult train_baseline(const std::vector<TrainingExample>& corpus, const BaselineConfig& config,
                           const text::StopWords& stop_words);

std::string training_report_json(const TrainingReport& report);

class BaselineImputer final : public Imputer {
public:
    explicit BaselineImputer(BaselineModel model) : model_(std::move(model)) {}

    [[nodiscard]] std::string_view name() const noexcept override { return "baseline"; }
    Prediction predict(const std::string& cve_id, const std::string& description) const override {
        return model_.predict(cve_id, description);
    }
    [[nodiscard]] const BaselineModel& model() const noexcept { return model_; }

private:
    BaselineModel model_;
};

}  // namespace vulnrisk::impute
