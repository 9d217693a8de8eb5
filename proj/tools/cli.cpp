// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"
#include "vulnrisk/baseline.hpp"
#include "vulnrisk/common.hpp"
#include "vulnrisk/error.hpp"
#include "vulnrisk/evaluation.hpp"
#include "vulnrisk/model_client.hpp"
#include "vulnrisk/nvd_api.hpp"
#include "vulnrisk/nvd_store.hpp"
#include "vulnrisk/risk.hpp"
#include "vulnrisk/scan_ingest.hpp"
#include "vulnrisk/taxonomy.hpp"
#include "vulnrisk/text.hpp"

namespace vulnrisk::cli {
namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kToolName = "vulnrisk";
constexpr const char* kToolVersion = VULNRISK_VERSION;

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCode::Config, message); }

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        config_error("bad value '" + text + "' for " + key);
    }
    return value;
}

// Flag values; unset optionals leave the config-file value in place.
struct Flags {
    std::optional<std::string> config_file;
    std::optional<std::string> store;
    std::optional<std::string> stopwords;
    std::optional<std::string> output_dir;
    std::optional<std::size_t> max_tokens;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> endpoint;
    std::optional<std::size_t> timeout_ms;

    // ingest-nvd
    std::vector<std::string> feeds;
    std::string feed_format = "auto";
    std::string policy = "replace";
    bool api = false;
    std::string api_url = "https://services.nvd.nist.gov";
    std::string api_key;
    std::size_t api_max_records = 0;
    std::size_t api_page_size = 2000;
    std::string api_last_mod_start;
    std::string api_last_mod_end;

    // import-scan / assess / evaluate
    std::string scan_path;
    std::string scan_format = "auto";

    // models
    std::optional<std::string> model;
    std::string model_file;
    std::string predictions_file;
    std::optional<double> mask;

    // train-baseline
    std::size_t feature_bits = 18;
    std::size_t epochs = 40;
    std::size_t patience = 3;
    std::size_t batch_size = 8;
    double learning_rate = 0.1;
    bool no_label_weights = false;
    bool bigrams = false;

    // stats
    bool export_csv = false;
};

struct FileRecord {
    std::string path;
    std::uint64_t hash = 0;
    std::size_t bytes = 0;
};

FileRecord describe_file(const fs::path& path) {
    const auto content = read_file(path);
    return {path.string(), fnv1a64(content), content.size()};
}

class Run {
public:
    Run(std::string subcommand, std::vector<std::string> args, PipelineConfig config, std::ostream& out)
        : subcommand_(std::move(subcommand)), args_(std::move(args)), config_(std::move(config)), out_(out) {}

    const PipelineConfig& config() const { return config_; }
    std::ostream& out() { return out_; }

    void input(const fs::path& path) { inputs_.push_back(describe_file(path)); }
    void note(const std::string& key, ordered_json value) { extra_[key] = std::move(value); }

    void emit(const std::string& name, const std::string& content) {
        fs::create_directories(config_.output_dir);
        write_file_atomic(config_.output_dir / name, content);
        outputs_.push_back({(config_.output_dir / name).string(), fnv1a64(content), content.size()});
    }

    void finish() {
        ordered_json doc;
        doc["tool"] = kToolName;
        doc["version"] = kToolVersion;
        doc["manifest_version"] = 1;
        doc["subcommand"] = subcommand_;
        doc["args"] = args_;
        ordered_json cfg;
        std::string canonical;
        for (const auto& [k, v] : config_.to_map()) {
            cfg[k] = v;
            canonical += k + "=" + v + "\n";
        }
        doc["config"] = cfg;
        doc["config_hash"] = hex64(fnv1a64(canonical));
        doc["seed"] = config_.split_seed;
        const auto& stop = stop_words();
        doc["stop_words"] = {{"source", config_.stop_word_list_path.empty() ? "builtin" : config_.stop_word_list_path.string()},
                             {"count", stop.words().size()},
                             {"fingerprint", stop.fingerprint()}};
        const auto files = [](const std::vector<FileRecord>& list) {
            auto arr = ordered_json::array();
            for (const auto& f : list) arr.push_back({{"path", f.path}, {"fnv1a64", hex64(f.hash)}, {"bytes", f.bytes}});
            return arr;
        };
        doc["inputs"] = files(inputs_);
        doc["outputs"] = files(outputs_);
        for (auto& [k, v] : extra_.items()) doc[k] = v;
        fs::create_directories(config_.output_dir);
        write_file_atomic(config_.output_dir / (subcommand_ + ".manifest.json"), doc.dump(2) + "\n");
    }

    const text::StopWords& stop_words() {
        if (!stop_words_) {
            if (config_.stop_word_list_path.empty()) {
                stop_words_ = text::StopWords::builtin();
            } else {
                stop_words_ = text::StopWords::load(config_.stop_word_list_path);
            }
        }
        return *stop_words_;
    }

    nvd::NvdStore open_store() {
        auto store = nvd::NvdStore::open(config_.store_path);
        const auto records = config_.store_path / "records.ndjson";
        note("store", {{"path", config_.store_path.string()},
                       {"records_fnv1a64", fs::exists(records) ? hex64(fnv1a64(read_file(records))) : hex64(fnv1a64(""))},
                       {"size", store.size()}});
        return store;
    }

private:
    std::string subcommand_;
    std::vector<std::string> args_;
    PipelineConfig config_;
    std::ostream& out_;
    std::vector<FileRecord> inputs_;
    std::vector<FileRecord> outputs_;
    ordered_json extra_ = ordered_json::object();
    std::optional<text::StopWords> stop_words_;
};

std::string fixed(double v, int digits) { return format_fixed(v, digits); }

// Accepts a raw Trivy report, a scanner CSV or a normalized scan.json.
scan::ScanReport load_scan(const fs::path& path, const std::string& format) {
    std::string chosen = format;
    if (chosen == "auto") {
        if (path.extension() == ".csv") {
            chosen = "csv";
        } else {
            const auto text = read_file(path);
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(text);
            } catch (const nlohmann::json::parse_error& e) {
                throw Error(ErrorCode::Schema, "scan report is neither CSV nor JSON: " + std::string(e.what()));
            }
            chosen = doc.is_object() && doc.contains("findings") && doc.contains("source") ? "normalized" : "trivy-json";
        }
    }
    if (chosen == "csv") return scan::parse_csv_file(path);
    if (chosen == "trivy-json") return scan::parse_trivy_json_file(path);
    if (chosen == "normalized") return scan::from_json(read_file(path));
    config_error("unknown scan format '" + format + "' (use auto, trivy-json, csv or normalized)");
}

fs::path model_file_for(const Run& run, const Flags& flags) {
    return flags.model_file.empty() ? run.config().output_dir / "baseline_model.txt" : fs::path(flags.model_file);
}

std::unique_ptr<impute::Imputer> make_imputer(Run& run, const Flags& flags, const std::string& kind) {
    if (kind == "baseline") {
        const auto path = model_file_for(run, flags);
        if (!fs::exists(path)) config_error("baseline model " + path.string() + " not found; run train-baseline first");
        run.input(path);
        return std::make_unique<impute::BaselineImputer>(impute::BaselineModel::load(path));
    }
    if (kind == "external") {
        if (run.config().endpoint.empty()) config_error("external model needs an endpoint (--endpoint or endpoint=)");
        return std::make_unique<impute::ExternalModelClient>(impute::Endpoint::parse(run.config().endpoint),
                                                             std::chrono::milliseconds(run.config().timeout_ms));
    }
    config_error("unknown model '" + kind + "'");
}

// Predicts every request, skipping descriptions that leave no content for the
// baseline tokenizer. Results are keyed by CVE id.
std::pair<std::map<std::string, impute::Prediction>, std::vector<std::string>> predict_all(
    Run& run, const impute::Imputer& imputer, std::vector<impute::PredictRequest> requests) {
    std::vector<std::string> skipped;
    if (imputer.name() == "baseline") {
        const auto& model = static_cast<const impute::BaselineImputer&>(imputer).model();
        std::vector<impute::PredictRequest> kept;
        for (auto& r : requests) {
            try {
                (void)text::preprocess(r.description, model.stop_words(), model.config().max_tokens);
                kept.push_back(std::move(r));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::EmptyAfterPreprocess) throw;
                skipped.push_back(r.cve_id);
            }
        }
        requests = std::move(kept);
    }
    std::map<std::string, impute::Prediction> out;
    for (auto& p : imputer.predict_batch(requests, run.config().workers)) {
        auto id = p.cve_id;
        out.emplace(std::move(id), std::move(p));
    }
    return {std::move(out), std::move(skipped)};
}

std::string predictions_ndjson(const std::map<std::string, impute::Prediction>& predictions) {
    std::string out;
    for (const auto& [id, p] : predictions) out += impute::prediction_to_json(p) + "\n";
    return out;
}

std::map<std::string, impute::Prediction> load_predictions(const fs::path& path) {
    std::map<std::string, impute::Prediction> out;
    const auto text = read_file(path);
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const auto line = normalize_whitespace(std::string_view(text).substr(pos, end - pos));
        if (!line.empty()) {
            auto p = impute::prediction_from_json(line);
            auto id = p.cve_id;
            out.insert_or_assign(std::move(id), std::move(p));
        }
        pos = end + 1;
    }
    return out;
}

ordered_json rejected_json(const std::vector<nvd::RejectedRecord>& rejected) {
    auto arr = ordered_json::array();
    for (const auto& r : rejected) arr.push_back({{"cve_id", r.cve_id}, {"reason", r.reason}});
    return arr;
}

ordered_json stats_json(const nvd::StoreStats& s) {
    return {{"total", s.total},
            {"available", s.available},
            {"unavailable", s.unavailable},
            {"percent_unavailable", s.percent_unavailable}};
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_ingest(Run& run, const Flags& flags) {
    if (flags.feeds.empty() && !flags.api) throw Error(ErrorCode::Usage, "ingest-nvd needs at least one feed file or --api");
    const auto policy = flags.policy == "reject" ? nvd::ReplacePolicy::Reject : nvd::ReplacePolicy::Replace;
    auto store = run.open_store();
    auto sources = ordered_json::array();
    const auto summarize = [&](const std::string& name, const std::string& format, const nvd::IngestReport& r) {
        sources.push_back({{"source", name},
                           {"format", format},
                           {"entries", r.entries},
                           {"ingested", r.ingested},
                           {"inserted", r.inserted},
                           {"replaced", r.replaced},
                           {"unchanged", r.unchanged},
                           {"rejected", rejected_json(r.rejected)}});
        run.out() << name << ": " << r.entries << " entries, " << r.inserted << " inserted, " << r.replaced
                  << " replaced, " << r.unchanged << " unchanged, " << r.rejected.size() << " rejected\n";
    };
    for (const auto& feed : flags.feeds) {
        run.input(feed);
        const auto text = read_file(feed);
        nvd::FeedFormat format{};
        if (flags.feed_format == "auto") {
            format = nvd::detect_feed_format(text);
        } else if (const auto f = nvd::parse_feed_format(flags.feed_format)) {
            format = *f;
        } else {
            config_error("unknown feed format '" + flags.feed_format + "'");
        }
        summarize(feed, std::string(nvd::feed_format_name(format)), store.ingest_parsed(nvd::parse_feed(text, format), policy));
    }
    if (flags.api) {
        nvd::ApiClientOptions options;
        options.base_url = flags.api_url;
        options.api_key = flags.api_key;
        options.max_records = flags.api_max_records;
        options.results_per_page = flags.api_page_size;
        options.last_modified_start = flags.api_last_mod_start;
        options.last_modified_end = flags.api_last_mod_end;
        const auto fetch = nvd::fetch_from_api(options);
        summarize(flags.api_url, "nvd-api-2.0", store.ingest_parsed(fetch.feed, policy));
        run.note("api", {{"url", flags.api_url}, {"pages", fetch.pages}, {"retries", fetch.retries}});
    }
    ordered_json report;
    report["sources"] = std::move(sources);
    report["store"] = stats_json(store.stats());
    run.emit("ingest_report.json", report.dump(2) + "\n");
}

void cmd_import_scan(Run& run, const Flags& flags) {
    run.input(flags.scan_path);
    const auto report = load_scan(flags.scan_path, flags.scan_format);
    const auto groups = scan::components(report);
    run.emit("scan.json", scan::to_json(report));
    run.out() << report.findings.size() << " findings across " << groups.size() << " components ("
              << report.row_errors.size() << " row errors, " << report.skipped_non_cve << " non-CVE advisories skipped)\n";
    for (const auto& e : report.row_errors) run.out() << "  line " << e.line << ": " << e.message << "\n";
}

void cmd_train(Run& run, const Flags& flags) {
    auto store = run.open_store();
    const auto corpus = impute::build_corpus(store.records(), run.stop_words(), run.config().max_tokens);
    impute::BaselineConfig config;
    config.feature_bits = flags.feature_bits;
    config.max_tokens = run.config().max_tokens;
    config.max_epochs = flags.epochs;
    config.patience = flags.patience;
    config.batch_size = flags.batch_size;
    config.learning_rate = flags.learning_rate;
    config.use_label_weights = !flags.no_label_weights;
    config.bigrams = flags.bigrams;
    config.seed = run.config().split_seed;
    config.workers = run.config().workers;
    const auto result = impute::train_baseline(corpus.examples, config, run.stop_words());
    run.emit("baseline_model.txt", result.model.serialize());
    run.emit("training_report.json", impute::training_report_json(result.report));
    run.note("corpus", {{"examples", corpus.examples.size()},
                        {"skipped_incomplete", corpus.skipped_incomplete},
                        {"skipped_empty", corpus.skipped_empty}});
    run.out() << "trained on " << result.report.n_train << " / validated on " << result.report.n_validation
              << " / tested on " << result.report.n_test << " records\n";
    for (const auto& task : result.report.tasks) {
        run.out() << "  " << std::left << std::setw(3) << cvss::metric_key(task.metric) << std::right;
        if (task.degenerate) {
            run.out() << " single label in training data, constant prediction\n";
            continue;
        }
        if (result.report.n_test == 0) {
            run.out() << " no held-out test records\n";
            continue;
        }
        run.out() << " accuracy " << fixed(task.test_metrics.accuracy, 4) << " majority " << fixed(task.majority_frequency, 4)
                  << " f1_weighted " << fixed(task.test_metrics.f1_weighted, 4) << " best_epoch " << task.best_epoch << "\n";
    }
}

void cmd_impute(Run& run, const Flags& flags) {
    auto store = run.open_store();
    const auto imputer = make_imputer(run, flags, flags.model.value_or(run.config().model));
    std::vector<impute::PredictRequest> requests;
    store.for_each([&](const nvd::CveRecord& r) {
        if (!r.vector.is_complete()) requests.push_back({r.cve_id, r.description});
    });
    const auto n_incomplete = requests.size();
    const auto [predictions, skipped] = predict_all(run, *imputer, std::move(requests));
    std::size_t low = 0;
    for (const auto& [id, p] : predictions) low += p.low_confidence ? 1 : 0;
    run.emit("predictions.ndjson", predictions_ndjson(predictions));
    ordered_json report;
    report["model"] = imputer->name();
    report["incomplete_records"] = n_incomplete;
    report["predicted"] = predictions.size();
    report["low_confidence"] = low;
    report["skipped_empty_description"] = skipped;
    run.emit("impute_report.json", report.dump(2) + "\n");
    run.out() << "imputed " << predictions.size() << " of " << n_incomplete << " incomplete records with "
              << imputer->name() << " (" << low << " low-confidence, " << skipped.size() << " skipped)\n";
}

void cmd_assess(Run& run, const Flags& flags) {
    run.input(flags.scan_path);
    const auto report = load_scan(flags.scan_path, flags.scan_format);
    auto store = run.open_store();
    const auto kind = flags.model.value_or(run.config().model);

    std::unordered_map<std::string, impute::Prediction> predictions;
    if (kind == "predictions") {
        if (flags.predictions_file.empty()) config_error("--model predictions needs --predictions FILE");
        run.input(flags.predictions_file);
        for (auto& [id, p] : load_predictions(flags.predictions_file)) predictions.emplace(id, std::move(p));
    } else if (kind != "none") {
        const auto imputer = make_imputer(run, flags, kind);
        std::set<std::string> wanted;
        std::vector<impute::PredictRequest> requests;
        for (const auto& f : report.findings) {
            const auto record = store.lookup(f.cve_id);
            if (record && !record->vector.is_complete() && wanted.insert(f.cve_id).second) {
                requests.push_back({record->cve_id, record->description});
            }
        }
        for (auto& [id, p] : predict_all(run, *imputer, std::move(requests)).first) predictions.emplace(id, std::move(p));
    }

    const auto result = risk::assess_scan(report, store, predictions, &taxonomy::Tagger::builtin());
    run.emit("components.csv", risk::components_csv(result));
    run.emit("components.json", risk::components_json(result));
    run.emit("cves.csv", risk::cves_csv(result));
    run.note("model", kind);

    run.out() << std::left << std::setw(32) << "component" << std::right << std::setw(6) << "cves" << std::setw(9) << "imputed"
              << std::setw(9) << "impact" << std::setw(9) << "exploit" << std::setw(7) << "base" << std::setw(7) << "max" << "\n";
    for (const auto& c : result.components) {
        run.out() << std::left << std::setw(32) << c.component << std::right << std::setw(6) << c.n_cves << std::setw(9)
                  << c.n_imputed << std::setw(9) << fixed(c.mean_impact, 3) << std::setw(9) << fixed(c.mean_exploitability, 3)
                  << std::setw(7) << fixed(c.mean_base, 2) << std::setw(7) << fixed(c.max_base, 1) << "\n";
    }
    if (!result.not_found.empty()) run.out() << result.not_found.size() << " findings not in the local NVD store\n";
}

void cmd_evaluate(Run& run, const Flags& flags) {
    auto store = run.open_store();
    std::vector<eval::ComponentRecords> groups;
    if (flags.scan_path.empty()) {
        eval::ComponentRecords all{"store", {}};
        store.for_each([&](const nvd::CveRecord& r) {
            if (r.vector.is_complete()) all.records.push_back(r);
        });
        groups.push_back(std::move(all));
    } else {
        run.input(flags.scan_path);
        for (const auto& g : scan::components(load_scan(flags.scan_path, flags.scan_format))) {
            eval::ComponentRecords group{g.component, {}};
            for (const auto& id : g.cve_ids) {
                if (auto r = store.lookup(id); r && r->vector.is_complete()) group.records.push_back(std::move(*r));
            }
            groups.push_back(std::move(group));
        }
    }

    const auto kind = flags.model.value_or(run.config().model);
    std::unique_ptr<impute::Imputer> imputer;
    if (kind == "perfect-oracle") {
        std::unordered_map<std::string, cvss::Cvss2Vector> truth;
        for (const auto& g : groups)
            for (const auto& r : g.records) truth.emplace(r.cve_id, r.vector);
        imputer = std::make_unique<impute::PerfectOracle>(std::move(truth));
    } else {
        imputer = make_imputer(run, flags, kind);
    }
    const auto result = eval::masking_experiment(groups, run.config().mask_fraction, run.config().split_seed, *imputer,
                                                 run.config().workers);
    run.emit("error_table.csv", eval::error_table_csv(result));
    run.emit("bias_table.csv", eval::bias_table_csv(result));
    run.emit("masking.json", eval::masking_json(result));
    run.note("model", kind);

    const auto cell = [](const std::optional<double>& v) { return v ? fixed(*v, 3) : std::string("n/a"); };
    run.out() << std::left << std::setw(32) << "component" << std::right << std::setw(8) << "masked" << std::setw(10)
              << "impact%" << std::setw(10) << "exploit%" << std::setw(10) << "base%" << std::setw(10) << "bias" << "\n";
    for (const auto& row : result.rows) {
        run.out() << std::left << std::setw(32) << row.component << std::right << std::setw(8) << row.n_masked << std::setw(10)
                  << cell(row.impact_error_pct) << std::setw(10) << cell(row.exploitability_error_pct) << std::setw(10)
                  << cell(row.base_error_pct) << std::setw(10) << fixed(row.base_bias, 3) << "\n";
    }
    for (const auto& s : result.skipped) run.out() << "skipped " << s.component << ": " << s.reason << "\n";
    const auto& z = result.zero_true_excluded;
    if (z.impact + z.exploitability + z.base > 0) {
        run.out() << "zero true scores excluded from error means: impact " << z.impact << ", exploitability "
                  << z.exploitability << ", base " << z.base << "\n";
    }
}

void cmd_stats(Run& run, const Flags& flags) {
    auto store = run.open_store();
    const auto s = store.stats();
    run.emit("stats.json", stats_json(s).dump(2) + "\n");
    if (flags.export_csv) run.emit("nvd_export.csv", store.export_csv());
    run.out() << "total " << s.total << ", available " << s.available << ", unavailable " << s.unavailable << " ("
              << fixed(std::floor(s.percent_unavailable * 100.0 + 1e-9) / 100.0, 2) << "% unavailable)\n";
}

}  // namespace

std::map<std::string, std::string> PipelineConfig::to_map() const {
    return {{"store_path", store_path.string()},
            {"stop_word_list_path", stop_word_list_path.string()},
            {"max_tokens", std::to_string(max_tokens)},
            {"split_seed", std::to_string(split_seed)},
            {"mask_fraction", format_double(mask_fraction)},
            {"model", model},
            {"endpoint", endpoint},
            {"timeout_ms", std::to_string(timeout_ms)},
            {"output_dir", output_dir.string()},
            {"workers", std::to_string(workers)}};
}

void PipelineConfig::validate() const {
    if (max_tokens < 10) config_error("max_tokens must be at least 10");
    if (!(mask_fraction > 0.0 && mask_fraction < 1.0)) config_error("mask_fraction must lie strictly between 0 and 1");
    if (workers == 0) config_error("workers must be at least 1");
    if (timeout_ms == 0) config_error("timeout_ms must be positive");
    if (model != "baseline" && model != "external") config_error("model must be baseline or external");
    if (!stop_word_list_path.empty() && !fs::is_regular_file(stop_word_list_path)) {
        config_error("stop-word list " + stop_word_list_path.string() + " not found");
    }
    if (store_path.empty()) config_error("store_path must not be empty");
    if (output_dir.empty()) config_error("output_dir must not be empty");
}

void apply_config_text(PipelineConfig& config, const std::string& text, const std::string& origin) {
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        ++line_no;
        const auto line = normalize_whitespace(std::string_view(text).substr(pos, end - pos));
        pos = end + 1;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        const auto where = origin + ":" + std::to_string(line_no);
        if (eq == std::string::npos) config_error(where + ": expected key=value");
        const auto key = normalize_whitespace(line.substr(0, eq));
        const auto value = normalize_whitespace(line.substr(eq + 1));
        if (key == "store_path") {
            config.store_path = value;
        } else if (key == "stop_word_list_path") {
            config.stop_word_list_path = value;
        } else if (key == "max_tokens") {
            config.max_tokens = parse_number<std::size_t>(where + " max_tokens", value);
        } else if (key == "split_seed") {
            config.split_seed = parse_number<std::uint64_t>(where + " split_seed", value);
        } else if (key == "mask_fraction") {
            config.mask_fraction = parse_number<double>(where + " mask_fraction", value);
        } else if (key == "model") {
            // "external(<endpoint>)" is accepted as shorthand for model + endpoint.
            if (value.starts_with("external(") && value.ends_with(")")) {
                config.model = "external";
                config.endpoint = value.substr(9, value.size() - 10);
            } else {
                config.model = value;
            }
        } else if (key == "endpoint") {
            config.endpoint = value;
        } else if (key == "timeout_ms") {
            config.timeout_ms = parse_number<std::size_t>(where + " timeout_ms", value);
        } else if (key == "output_dir") {
            config.output_dir = value;
        } else if (key == "workers") {
            config.workers = parse_number<std::size_t>(where + " workers", value);
        } else {
            config_error(where + ": unknown key '" + key + "'");
        }
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Container vulnerability risk assessment with CVSS v2 imputation", kToolName};
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
    app.require_subcommand(1);
    app.fallthrough();

    Flags flags;
    app.add_option("--config", flags.config_file, "key=value configuration file")->check(CLI::ExistingFile);
    app.add_option("--store", flags.store, "NVD store directory (overrides VULNRISK_STORE)");
    app.add_option("--stopwords", flags.stopwords, "stop-word list file");
    app.add_option("--output-dir", flags.output_dir, "directory for all outputs");
    app.add_option("--max-tokens", flags.max_tokens, "model input length including two special tokens");
    app.add_option("--seed", flags.seed, "split and masking seed");
    app.add_option("--workers", flags.workers, "parallel imputation and training workers");
    app.add_option("--endpoint", flags.endpoint, "external model endpoint (unix:PATH, tcp:HOST:PORT, exec:CMD)");
    app.add_option("--timeout-ms", flags.timeout_ms, "external model deadline per request");

    auto* ingest = app.add_subcommand("ingest-nvd", "ingest NVD JSON feeds into the local store");
    ingest->add_option("feeds", flags.feeds, "feed files")->check(CLI::ExistingFile);
    ingest->add_option("--format", flags.feed_format, "auto, nvd-api-2.0-json or legacy-feed-json");
    ingest->add_option("--policy", flags.policy, "replace or reject on re-ingested ids")
        ->check(CLI::IsMember({"replace", "reject"}));
    ingest->add_flag("--api", flags.api, "also fetch from the NVD API 2.0");
    ingest->add_option("--api-url", flags.api_url, "API base URL");
    ingest->add_option("--api-key", flags.api_key, "NVD API key");
    ingest->add_option("--api-max-records", flags.api_max_records, "stop after this many records (0: all)");
    ingest->add_option("--api-page-size", flags.api_page_size, "results per page");
    ingest->add_option("--last-mod-start", flags.api_last_mod_start, "lastModStartDate for incremental refresh");
    ingest->add_option("--last-mod-end", flags.api_last_mod_end, "lastModEndDate for incremental refresh");

    auto* import_scan = app.add_subcommand("import-scan", "normalize a scanner report into scan.json");
    import_scan->add_option("report", flags.scan_path, "Trivy JSON or CSV report")->required()->check(CLI::ExistingFile);
    import_scan->add_option("--format", flags.scan_format, "auto, trivy-json or csv");

    auto* train = app.add_subcommand("train-baseline", "train the built-in classifier on complete store records");
    train->add_option("--feature-bits", flags.feature_bits, "hashed feature space of 2^bits")->check(CLI::Range(4, 26));
    train->add_option("--epochs", flags.epochs, "maximum epochs")->check(CLI::PositiveNumber);
    train->add_option("--patience", flags.patience, "early-stopping patience")->check(CLI::PositiveNumber);
    train->add_option("--batch-size", flags.batch_size, "mini-batch size")->check(CLI::PositiveNumber);
    train->add_option("--learning-rate", flags.learning_rate, "initial learning rate")->check(CLI::PositiveNumber);
    train->add_flag("--no-label-weights", flags.no_label_weights, "train with unit class weights");
    train->add_flag("--bigrams", flags.bigrams, "add hashed token bigrams");

    auto* impute_cmd = app.add_subcommand("impute", "predict missing metrics for incomplete store records");
    impute_cmd->add_option("--model", flags.model, "baseline or external")->check(CLI::IsMember({"baseline", "external"}));
    impute_cmd->add_option("--model-file", flags.model_file, "baseline model file");

    auto* assess = app.add_subcommand("assess", "score the CVEs of a scan and aggregate per component");
    assess->add_option("--scan", flags.scan_path, "scan report or scan.json")->required()->check(CLI::ExistingFile);
    assess->add_option("--scan-format", flags.scan_format, "auto, trivy-json, csv or normalized");
    assess->add_option("--model", flags.model, "predictions, baseline, external or none")
        ->check(CLI::IsMember({"predictions", "baseline", "external", "none"}));
    assess->add_option("--predictions", flags.predictions_file, "predictions.ndjson for --model predictions");
    assess->add_option("--model-file", flags.model_file, "baseline model file");

    auto* evaluate = app.add_subcommand("evaluate", "masked-ground-truth experiment");
    evaluate->add_option("--mask", flags.mask, "fraction of complete records hidden per component");
    evaluate->add_option("--model", flags.model, "baseline, external or perfect-oracle")
        ->check(CLI::IsMember({"baseline", "external", "perfect-oracle"}));
    evaluate->add_option("--scan", flags.scan_path, "group records by the components of this scan")
        ->check(CLI::ExistingFile);
    evaluate->add_option("--scan-format", flags.scan_format, "auto, trivy-json, csv or normalized");
    evaluate->add_option("--model-file", flags.model_file, "baseline model file");

    auto* stats = app.add_subcommand("stats", "completeness statistics of the store");
    stats->add_flag("--export", flags.export_csv, "also write nvd_export.csv");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ErrorCode::Usage);
    }

    const auto* sub = app.get_subcommands().front();
    try {
        PipelineConfig config;
        if (flags.config_file) apply_config_text(config, read_file(*flags.config_file), *flags.config_file);
        if (const char* env = std::getenv("VULNRISK_STORE"); env != nullptr && *env != '\0') config.store_path = env;
        if (flags.store) config.store_path = *flags.store;
        if (flags.stopwords) config.stop_word_list_path = *flags.stopwords;
        if (flags.output_dir) config.output_dir = *flags.output_dir;
        if (flags.max_tokens) config.max_tokens = *flags.max_tokens;
        if (flags.seed) config.split_seed = *flags.seed;
        if (flags.workers) config.workers = *flags.workers;
        if (flags.endpoint) config.endpoint = *flags.endpoint;
        if (flags.timeout_ms) config.timeout_ms = *flags.timeout_ms;
        if (flags.mask) config.mask_fraction = *flags.mask;
        if (flags.model == "external") config.model = "external";
        config.validate();

        Run run(sub->get_name(), args, config, out);
        if (flags.config_file) run.input(*flags.config_file);
        if (!config.stop_word_list_path.empty()) run.input(config.stop_word_list_path);

        if (sub == ingest) {
            cmd_ingest(run, flags);
        } else if (sub == import_scan) {
            cmd_import_scan(run, flags);
        } else if (sub == train) {
            cmd_train(run, flags);
        } else if (sub == impute_cmd) {
            cmd_impute(run, flags);
        } else if (sub == assess) {
            cmd_assess(run, flags);
        } else if (sub == evaluate) {
            cmd_evaluate(run, flags);
        } else {
            cmd_stats(run, flags);
        }
        run.finish();
        return 0;
    } catch (const Error& e) {
        err << kToolName << ": " << error_code_name(e.code()) << ": " << e.what() << "\n";
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        err << kToolName << ": unexpected failure: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace vulnrisk::cli
