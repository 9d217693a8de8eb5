// SPDX-License-Identifier: Apache-2.0
#include "vulnrisk/baseline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "vulnrisk/common.hpp"
#include "vulnrisk/error.hpp"

namespace vulnrisk::impute {
namespace {

constexpr std::size_t K = cvss::kLabelsPerMetric;
constexpr std::string_view kModelHeader = "vulnrisk-baseline-model v1";

using Probs = std::array<double, K>;

Probs softmax(const std::array<double, K>& logits, const std::array<bool, K>& present) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < K; ++c) {
        if (present[c]) max_logit = std::max(max_logit, logits[c]);
    }
    Probs p{};
    double sum = 0.0;
    for (std::size_t c = 0; c < K; ++c) {
        if (!present[c]) continue;
        p[c] = std::exp(logits[c] - max_logit);
        sum += p[c];
    }
    for (auto& v : p) v /= sum;
    return p;
}

// Per-example loss term. Underflowed probabilities are floored like the
// public loss function does.
double loss_term(const Probs& p, std::size_t y, const std::vector<double>& class_weights) {
    if (p[y] > 0.0) return weighted_cross_entropy(p, y, class_weights);
    return -class_weights[y] * std::log(kProbabilityFloor);
}

std::string id_set_fingerprint(std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end());
    std::string joined;
    for (const auto& id : ids) {
        joined += id;
        joined.push_back('\n');
    }
    return hex64(fnv1a64(joined));
}

double parse_double(std::string_view token) {
    double value = 0.0;
    const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
    if (result.ec != std::errc{} || result.ptr != token.data() + token.size()) {
        throw Error(ErrorCode::Schema, "bad number '" + std::string(token) + "' in model file");
    }
    return value;
}

std::uint64_t parse_u64(std::string_view token) {
    std::uint64_t value = 0;
    const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
    if (result.ec != std::errc{} || result.ptr != token.data() + token.size()) {
        throw Error(ErrorCode::Schema, "bad integer '" + std::string(token) + "' in model file");
    }
    return value;
}

// Whitespace-separated token reader over the model text.
class ModelReader {
public:
    explicit ModelReader(std::string_view text) : text_(text) {}

    std::string_view next() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ >= text_.size()) throw Error(ErrorCode::Schema, "truncated model file");
        const auto start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        return text_.substr(start, pos_ - start);
    }
    void expect(std::string_view word) {
        const auto got = next();
        if (got != word) throw Error(ErrorCode::Schema, "model file: expected '" + std::string(word) + "', got '" + std::string(got) + "'");
    }
    std::uint64_t u64() { return parse_u64(next()); }
    double f64() { return parse_double(next()); }
    std::string_view rest_of_line() {
        const auto end = text_.find('\n', pos_);
        const auto line = text_.substr(pos_, end == std::string_view::npos ? std::string_view::npos : end - pos_);
        pos_ = end == std::string_view::npos ? text_.size() : end + 1;
        return line;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

CorpusBuild build_corpus(const std::vector<nvd::CveRecord>& records, const text::StopWords& stop_words,
                         std::size_t max_tokens) {
    CorpusBuild out;
    for (const auto& record : records) {
        if (record.completeness_tag() != 1) {
            ++out.skipped_incomplete;
            continue;
        }
        TrainingExample example;
        example.id = record.cve_id;
        try {
            example.tokens = text::preprocess(record.description, stop_words, max_tokens);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EmptyAfterPreprocess) throw;
            ++out.skipped_empty;
            continue;
        }
        for (auto metric : cvss::kAllMetrics) example.labels[static_cast<std::size_t>(metric)] = *record.vector.get(metric);
        out.examples.push_back(std::move(example));
    }
    return out;
}

FeatureVector BaselineModel::features(const text::TokenSeq& tokens) const {
    const std::uint64_t mask = (std::uint64_t{1} << config_.feature_bits) - 1;
    std::map<std::uint32_t, double> counts;
    for (std::size_t i = 0; i < tokens.tokens.size(); ++i) {
        counts[static_cast<std::uint32_t>(fnv1a64(tokens.tokens[i], config_.hash_seed) & mask)] += 1.0;
        if (config_.bigrams && i + 1 < tokens.tokens.size()) {
            const auto bigram = tokens.tokens[i] + ' ' + tokens.tokens[i + 1];
            counts[static_cast<std::uint32_t>(fnv1a64(bigram, config_.hash_seed) & mask)] += 1.0;
        }
    }
    double norm = 0.0;
    for (const auto& [idx, count] : counts) norm += count * count;
    norm = std::sqrt(norm);
    FeatureVector x;
    x.index.reserve(counts.size());
    x.value.reserve(counts.size());
    for (const auto& [idx, count] : counts) {
        x.index.push_back(idx);
        x.value.push_back(count / norm);
    }
    return x;
}

std::array<double, K> BaselineModel::probabilities(cvss::Metric metric, const FeatureVector& x) const {
    const auto& task = tasks_[static_cast<std::size_t>(metric)];
    if (task.degenerate) {
        Probs p{};
        p[task.constant_class] = 1.0;
        return p;
    }
    std::array<double, K> logits = task.bias;
    for (std::size_t j = 0; j < x.index.size(); ++j) {
        const double* w = &task.weights[static_cast<std::size_t>(x.index[j]) * K];
        for (std::size_t c = 0; c < K; ++c) logits[c] += w[c] * x.value[j];
    }
    return softmax(logits, task.present);
}

Prediction BaselineModel::predict_tokens(const std::string& cve_id, const text::TokenSeq& tokens) const {
    Prediction out;
    out.cve_id = cve_id;
    out.source = PredictionSource::Baseline;
    out.low_confidence = tokens.word_count < text::kLowConfidenceWordCount;
    const auto x = features(tokens);
    for (auto metric : cvss::kAllMetrics) {
        const auto p = probabilities(metric, x);
        const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        out.metrics[static_cast<std::size_t>(metric)] = {cvss::label_at(metric, best), p[best]};
    }
    return out;
}

Prediction BaselineModel::predict(const std::string& cve_id, const std::string& description) const {
    return predict_tokens(cve_id, text::preprocess(description, stop_words_, config_.max_tokens));
}

// ---------------------------------------------------------------------------
// Training

struct Trainer {
    const BaselineModel& shape;  // config and hashing
    const std::vector<FeatureVector>& x_train;
    const std::vector<FeatureVector>& x_val;

    struct Outcome {
        BaselineModel::TaskModel model;
        TaskReport report;
    };

    static double forward_loss(const BaselineModel::TaskModel& task, const std::vector<FeatureVector>& xs,
                               const std::vector<std::size_t>& ys, const std::vector<double>& class_weights) {
        double loss = 0.0;
        double weight_sum = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double w = class_weights[ys[i]];
            if (w == 0.0) continue;
            loss += loss_term(logits_to_probs(task, xs[i]), ys[i], class_weights);
            weight_sum += w;
        }
        return weight_sum == 0.0 ? 0.0 : loss / weight_sum;
    }

    static Probs logits_to_probs(const BaselineModel::TaskModel& task, const FeatureVector& x) {
        std::array<double, K> logits = task.bias;
        for (std::size_t j = 0; j < x.index.size(); ++j) {
            const double* w = &task.weights[static_cast<std::size_t>(x.index[j]) * K];
            for (std::size_t c = 0; c < K; ++c) logits[c] += w[c] * x.value[j];
        }
        return softmax(logits, task.present);
    }

    Outcome train_task(cvss::Metric metric, const std::vector<std::size_t>& y_train,
                       const std::vector<std::size_t>& y_val) const {
        const auto& config = shape.config();
        Outcome out;
        out.report.metric = metric;
        out.report.weights = compute_label_weights(y_train, K);
        auto& task = out.model;
        std::size_t distinct = 0;
        for (std::size_t c = 0; c < K; ++c) {
            task.present[c] = out.report.weights.present(c);
            if (task.present[c]) {
                ++distinct;
                task.constant_class = c;
            }
        }
        if (distinct < 2) {
            task.degenerate = true;
            out.report.degenerate = true;
            return out;
        }

        std::vector<double> class_weights = out.report.weights.dense();
        if (!config.use_label_weights) {
            for (std::size_t c = 0; c < K; ++c) class_weights[c] = task.present[c] ? 1.0 : 0.0;
        }

        const std::size_t dim = std::size_t{1} << config.feature_bits;
        task.weights.assign(dim * K, 0.0);
        auto best = task;
        double best_loss = std::numeric_limits<double>::infinity();
        std::size_t since_best = 0;
        const bool have_val = !x_val.empty();
        const std::uint64_t task_seed = config.seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(metric) + 1));
        const std::size_t batch = std::max<std::size_t>(config.batch_size, 1);

        std::vector<Probs> batch_probs(batch);
        for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
            const double lr = config.learning_rate / (1.0 + config.lr_decay * static_cast<double>(epoch - 1));
            const auto order = shuffled_indices(x_train.size(), task_seed + epoch);
            for (std::size_t start = 0; start < order.size(); start += batch) {
                const auto end = std::min(order.size(), start + batch);
                double weight_sum = 0.0;
                for (std::size_t b = start; b < end; ++b) {
                    batch_probs[b - start] = logits_to_probs(task, x_train[order[b]]);
                    weight_sum += class_weights[y_train[order[b]]];
                }
                if (weight_sum == 0.0) continue;
                // Gradient of the weighted-mean loss with respect to the logits.
                for (std::size_t b = start; b < end; ++b) {
                    const auto i = order[b];
                    const double w = class_weights[y_train[i]] / weight_sum;
                    std::array<double, K> g{};
                    for (std::size_t c = 0; c < K; ++c) {
                        if (!task.present[c]) continue;
                        g[c] = w * (batch_probs[b - start][c] - (c == y_train[i] ? 1.0 : 0.0));
                        task.bias[c] -= lr * g[c];
                    }
                    const auto& x = x_train[i];
                    for (std::size_t j = 0; j < x.index.size(); ++j) {
                        double* wrow = &task.weights[static_cast<std::size_t>(x.index[j]) * K];
                        for (std::size_t c = 0; c < K; ++c) wrow[c] -= lr * g[c] * x.value[j];
                    }
                }
            }
            EpochStats stats;
            stats.epoch = epoch;
            stats.train_loss = forward_loss(task, x_train, y_train, class_weights);
            stats.validation_loss = have_val ? forward_loss(task, x_val, y_val, class_weights) : stats.train_loss;
            out.report.curve.push_back(stats);
            if (stats.validation_loss < best_loss) {
                best_loss = stats.validation_loss;
                best = task;
                out.report.best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= config.patience) {
                break;
            }
        }
        task = std::move(best);
        return out;
    }
};

TrainResult train_baseline(const std::vector<TrainingExample>& corpus, const BaselineConfig& config,
                           const text::StopWords& stop_words) {
    if (corpus.empty()) throw Error(ErrorCode::EmptyDataset, "training corpus is empty");
    if (config.feature_bits < 4 || config.feature_bits > 26) throw Error(ErrorCode::Config, "feature_bits must lie in [4, 26]");

    TrainResult result;
    result.model.config_ = config;
    result.model.stop_words_ = stop_words;

    const auto split = eval::split_indices(corpus.size(), config.ratios, config.seed);
    auto& report = result.report;
    report.n_train = split.train.size();
    report.n_validation = split.validation.size();
    report.n_test = split.test.size();
    if (split.train.empty()) throw Error(ErrorCode::EmptyDataset, "training split is empty");

    const auto ids_of = [&](const std::vector<std::size_t>& idx) {
        std::vector<std::string> ids;
        ids.reserve(idx.size());
        for (auto i : idx) ids.push_back(corpus[i].id);
        return ids;
    };
    report.split_fingerprints = {id_set_fingerprint(ids_of(split.train)), id_set_fingerprint(ids_of(split.validation)),
                                 id_set_fingerprint(ids_of(split.test))};
    report.test_ids = ids_of(split.test);

    const auto featurize = [&](const std::vector<std::size_t>& idx) {
        std::vector<FeatureVector> xs;
        xs.reserve(idx.size());
        for (auto i : idx) xs.push_back(result.model.features(corpus[i].tokens));
        return xs;
    };
    const auto x_train = featurize(split.train);
    const auto x_val = featurize(split.validation);
    const auto x_test = featurize(split.test);

    const auto labels_of = [&](const std::vector<std::size_t>& idx, cvss::Metric metric) {
        std::vector<std::size_t> ys;
        ys.reserve(idx.size());
        for (auto i : idx) ys.push_back(cvss::class_index(metric, corpus[i].labels[static_cast<std::size_t>(metric)]));
        return ys;
    };

    const Trainer trainer{result.model, x_train, x_val};
    std::array<Trainer::Outcome, cvss::kMetricCount> outcomes;
    const auto run_task = [&](std::size_t m) {
        const auto metric = cvss::kAllMetrics[m];
        outcomes[m] = trainer.train_task(metric, labels_of(split.train, metric), labels_of(split.validation, metric));
    };
    const auto workers = std::clamp<std::size_t>(config.workers, 1, cvss::kMetricCount);
    if (workers == 1) {
        for (std::size_t m = 0; m < cvss::kMetricCount; ++m) run_task(m);
    } else {
        // Tasks share only read-only inputs; each writes its own outcome slot.
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t m = w; m < cvss::kMetricCount; m += workers) run_task(m);
            });
        }
    }

    for (std::size_t m = 0; m < cvss::kMetricCount; ++m) {
        result.model.tasks_[m] = std::move(outcomes[m].model);
        report.tasks[m] = std::move(outcomes[m].report);
    }

    if (!x_test.empty()) {
        for (std::size_t m = 0; m < cvss::kMetricCount; ++m) {
            const auto metric = cvss::kAllMetrics[m];
            const auto truth = labels_of(split.test, metric);
            std::vector<std::size_t> predicted;
            predicted.reserve(truth.size());
            for (const auto& x : x_test) {
                const auto p = result.model.probabilities(metric, x);
                predicted.push_back(static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()));
            }
            auto& task = report.tasks[m];
            task.test_metrics = eval::classification_metrics(truth, predicted, K);
            std::array<std::size_t, K> counts{};
            for (auto y : truth) ++counts[y];
            task.majority_frequency =
                static_cast<double>(*std::max_element(counts.begin(), counts.end())) / static_cast<double>(truth.size());
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Serialization

std::string BaselineModel::serialize() const {
    std::ostringstream out;
    out << kModelHeader << '\n';
    out << "feature_bits " << config_.feature_bits << '\n';
    out << "hash_seed " << config_.hash_seed << '\n';
    out << "bigrams " << (config_.bigrams ? 1 : 0) << '\n';
    out << "max_tokens " << config_.max_tokens << '\n';
    out << "learning_rate " << format_double(config_.learning_rate) << '\n';
    out << "lr_decay " << format_double(config_.lr_decay) << '\n';
    out << "batch_size " << config_.batch_size << '\n';
    out << "max_epochs " << config_.max_epochs << '\n';
    out << "patience " << config_.patience << '\n';
    out << "use_label_weights " << (config_.use_label_weights ? 1 : 0) << '\n';
    out << "seed " << config_.seed << '\n';
    out << "ratios " << format_double(config_.ratios.train) << ' ' << format_double(config_.ratios.validation) << ' '
        << format_double(config_.ratios.test) << '\n';
    out << "stopwords " << stop_words_.words().size() << ' ' << stop_words_.fingerprint() << '\n';
    for (const auto& w : stop_words_.words()) out << w << '\n';
    for (std::size_t m = 0; m < cvss::kMetricCount; ++m) {
        const auto& task = tasks_[m];
        out << "task " << cvss::metric_key(cvss::kAllMetrics[m]) << " degenerate " << (task.degenerate ? 1 : 0)
            << " constant " << task.constant_class << " present";
        for (bool p : task.present) out << ' ' << (p ? 1 : 0);
        out << '\n';
        out << "bias";
        for (double b : task.bias) out << ' ' << format_double(b);
        out << '\n';
        std::size_t rows = 0;
        for (std::size_t f = 0; f * K < task.weights.size(); ++f) {
            if (task.weights[f * K] != 0.0 || task.weights[f * K + 1] != 0.0 || task.weights[f * K + 2] != 0.0) ++rows;
        }
        out << "rows " << rows << '\n';
        for (std::size_t f = 0; f * K < task.weights.size(); ++f) {
            const double* w = &task.weights[f * K];
            if (w[0] == 0.0 && w[1] == 0.0 && w[2] == 0.0) continue;
            out << f << ' ' << format_double(w[0]) << ' ' << format_double(w[1]) << ' ' << format_double(w[2]) << '\n';
        }
    }
    out << "end\n";
    return std::move(out).str();
}

BaselineModel BaselineModel::deserialize(std::string_view text) {
    ModelReader in(text);
    const auto header = in.rest_of_line();
    if (header != kModelHeader) throw Error(ErrorCode::Schema, "not a baseline model file (header '" + std::string(header) + "')");
    BaselineModel model;
    auto& c = model.config_;
    in.expect("feature_bits");
    c.feature_bits = in.u64();
    if (c.feature_bits < 4 || c.feature_bits > 26) throw Error(ErrorCode::Schema, "feature_bits out of range in model file");
    in.expect("hash_seed");
    c.hash_seed = in.u64();
    in.expect("bigrams");
    c.bigrams = in.u64() != 0;
    in.expect("max_tokens");
    c.max_tokens = in.u64();
    in.expect("learning_rate");
    c.learning_rate = in.f64();
    in.expect("lr_decay");
    c.lr_decay = in.f64();
    in.expect("batch_size");
    c.batch_size = in.u64();
    in.expect("max_epochs");
    c.max_epochs = in.u64();
    in.expect("patience");
    c.patience = in.u64();
    in.expect("use_label_weights");
    c.use_label_weights = in.u64() != 0;
    in.expect("seed");
    c.seed = in.u64();
    in.expect("ratios");
    c.ratios.train = in.f64();
    c.ratios.validation = in.f64();
    c.ratios.test = in.f64();
    in.expect("stopwords");
    const auto n_words = in.u64();
    const auto fingerprint = std::string(in.next());
    std::vector<std::string> words;
    for (std::uint64_t i = 0; i < n_words; ++i) words.emplace_back(in.next());
    model.stop_words_ = text::StopWords(std::move(words));
    if (model.stop_words_.fingerprint() != fingerprint) throw Error(ErrorCode::Schema, "stop-word list fingerprint mismatch");

    const std::size_t dim = std::size_t{1} << c.feature_bits;
    for (std::size_t m = 0; m < cvss::kMetricCount; ++m) {
        auto& task = model.tasks_[m];
        in.expect("task");
        in.expect(cvss::metric_key(cvss::kAllMetrics[m]));
        in.expect("degenerate");
        task.degenerate = in.u64() != 0;
        in.expect("constant");
        task.constant_class = in.u64();
        if (task.constant_class >= K) throw Error(ErrorCode::Schema, "constant class out of range");
        in.expect("present");
        for (auto& p : task.present) p = in.u64() != 0;
        in.expect("bias");
        for (auto& b : task.bias) b = in.f64();
        in.expect("rows");
        const auto rows = in.u64();
        if (!task.degenerate) task.weights.assign(dim * K, 0.0);
        for (std::uint64_t r = 0; r < rows; ++r) {
            const auto f = in.u64();
            if (f >= dim || task.degenerate) throw Error(ErrorCode::Schema, "weight row out of range");
            for (std::size_t k = 0; k < K; ++k) task.weights[f * K + k] = in.f64();
        }
    }
    in.expect("end");
    return model;
}

void BaselineModel::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

BaselineModel BaselineModel::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

std::string training_report_json(const TrainingReport& report) {
    nlohmann::ordered_json doc;
    doc["n_train"] = report.n_train;
    doc["n_validation"] = report.n_validation;
    doc["n_test"] = report.n_test;
    doc["split_fingerprints"] = {{"train", report.split_fingerprints[0]},
                                 {"validation", report.split_fingerprints[1]},
                                 {"test", report.split_fingerprints[2]}};
    auto& tasks = doc["tasks"] = nlohmann::ordered_json::array();
    for (const auto& task : report.tasks) {
        nlohmann::ordered_json t;
        t["metric"] = cvss::metric_key(task.metric);
        t["degenerate"] = task.degenerate;
        nlohmann::ordered_json weights;
        for (std::size_t c = 0; c < task.weights.num_classes(); ++c) {
            const auto label = std::string(cvss::label_text(cvss::label_at(task.metric, c)));
            weights[label] = {{"frequency", task.weights.frequencies[c]},
                              {"weight", task.weights.weights[c] ? nlohmann::ordered_json(*task.weights.weights[c])
                                                                 : nlohmann::ordered_json(nullptr)}};
        }
        t["label_weights"] = std::move(weights);
        t["best_epoch"] = task.best_epoch;
        auto& curve = t["curve"] = nlohmann::ordered_json::array();
        for (const auto& e : task.curve) {
            curve.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_loss", e.validation_loss}});
        }
        const auto& m = task.test_metrics;
        t["test"] = {{"samples", m.samples},
                     {"accuracy", m.accuracy},
                     {"precision_weighted", m.precision_weighted},
                     {"recall_weighted", m.recall_weighted},
                     {"f1_weighted", m.f1_weighted},
                     {"f1_micro", m.f1_micro},
                     {"majority_frequency", task.majority_frequency},
                     {"confusion", m.confusion}};
        tasks.push_back(std::move(t));
    }
    return doc.dump(2) + "\n";
}

}  // namespace vulnrisk::impute
