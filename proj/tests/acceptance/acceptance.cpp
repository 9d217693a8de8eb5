// SPDX-License-Identifier: Apache-2.0
// Acceptance runner: one PASS/FAIL/SKIP line per criterion.
//
//   vulnrisk_acceptance               run every criterion; exit 1 on any FAIL
//   vulnrisk_acceptance learnability  run only the real-data criterion; exit 77 when skipped
//
// The learnability criterion reads VULNRISK_NVD_SLICE: an NVD feed file
// (API 2.0 or legacy JSON) or a directory of them.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "vulnrisk/baseline.hpp"
#include "vulnrisk/common.hpp"
#include "vulnrisk/cvss.hpp"
#include "vulnrisk/error.hpp"
#include "vulnrisk/evaluation.hpp"
#include "vulnrisk/imputer.hpp"
#include "vulnrisk/nvd_store.hpp"
#include "vulnrisk/text.hpp"

using namespace vulnrisk;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
    Verdict verdict = Verdict::Pass;
    std::string detail;
};

class Checker {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok && failures_.size() < 5) failures_.push_back(what);
        if (!ok) ++failed_;
    }
    [[nodiscard]] Outcome outcome(const std::string& detail) const {
        if (failed_ == 0) return {Verdict::Pass, detail};
        std::string msg = std::to_string(failed_) + " check(s) failed";
        for (const auto& f : failures_) msg += "; " + f;
        return {Verdict::Fail, msg};
    }

private:
    std::size_t failed_ = 0;
    std::vector<std::string> failures_;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string secs(double s) { return format_fixed(s, 3) + " s"; }

Outcome cvss_oracle() {
    const auto start = std::chrono::steady_clock::now();
    Checker c;
    std::size_t n = 0;
    for (const auto& codes : testing::all_vector_codes()) {
        const auto v = cvss::parse_vector(codes.text());
        const auto o = testing::oracle_scores(codes.av, codes.ac, codes.au, codes.c, codes.i, codes.a);
        c.expect(std::abs(cvss::impact_score(v) - o.impact) <= 1e-9, codes.text() + " impact");
        c.expect(std::abs(cvss::exploitability_score(v) - o.exploitability) <= 1e-9, codes.text() + " exploitability");
        c.expect(std::abs(cvss::raw_base_score(v) - o.raw_base) <= 1e-9, codes.text() + " base");
        ++n;
    }
    c.expect(n == 729, "expected 729 vectors");
    c.expect(cvss::base_score(cvss::parse_vector("AV:N/AC:L/Au:N/C:P/I:P/A:P")) == 7.5, "partial spot value 7.5");
    c.expect(cvss::base_score(cvss::parse_vector("AV:N/AC:L/Au:N/C:C/I:C/A:C")) == 10.0, "all-Complete spot value 10.0");
    const double elapsed = seconds_since(start);
    c.expect(elapsed < 1.0, "runtime " + secs(elapsed) + " >= 1 s");
    return c.outcome(std::to_string(n) + " vectors within 1e-9, spot values exact, " + secs(elapsed));
}

Outcome label_weights() {
    Checker c;
    SplitMix64 rng(1001);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + rng.below(5);
        std::vector<std::size_t> labels(1 + rng.below(5000));
        for (auto& l : labels) l = rng.below(k);
        const auto w = impute::compute_label_weights(labels, k);
        for (std::size_t cls = 0; cls < k; ++cls) {
            if (!w.present(cls)) continue;
            c.expect(std::abs(*w.weights[cls] * static_cast<double>(w.frequencies[cls]) -
                              static_cast<double>(labels.size())) <= 1e-9,
                     "trial " + std::to_string(trial));
        }
    }
    std::vector<std::size_t> labels(90, 0);
    labels.insert(labels.end(), 10, 1);
    const auto w = impute::compute_label_weights(labels, 2);
    c.expect(std::abs(*w.weights[0] - 1.11) <= 0.01, "90/10 majority weight " + format_double(*w.weights[0]));
    c.expect(std::abs(*w.weights[1] - 10.0) <= 0.01, "90/10 minority weight " + format_double(*w.weights[1]));
    return c.outcome("100 random datasets within 1e-9; 90/10 gives " + format_fixed(*w.weights[0], 2) + " and " +
                     format_fixed(*w.weights[1], 2));
}

Outcome weighted_loss() {
    Checker c;
    SplitMix64 rng(1002);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 2 + rng.below(4);
        std::vector<double> p(k);
        double sum = 0.0;
        for (auto& x : p) sum += (x = 0.01 + rng.uniform());
        for (auto& x : p) x /= sum;
        const auto t = rng.below(k);
        const double diff = std::abs(impute::weighted_cross_entropy(p, t, std::vector<double>(k, 1.0)) + std::log(p[t]));
        worst = std::max(worst, diff);
        c.expect(diff <= 1e-9, "trial " + std::to_string(trial));
    }
    std::ostringstream detail;
    detail << "1000 cases, max deviation " << worst;
    return c.outcome(detail.str());
}

Outcome completeness() {
    Checker c;
    SplitMix64 rng(1003);
    std::vector<nvd::CveRecord> records;
    for (std::size_t i = 0; i < 1821 + 574; ++i) records.push_back(testing::synthetic_record(i, rng, i < 1821));
    auto store = nvd::NvdStore::in_memory();
    store.ingest_records(records);
    const auto s = store.stats();
    c.expect(s.available == 1821 && s.unavailable == 574, "tag counts");
    c.expect(std::abs(s.percent_unavailable - 23.96) <= 0.01, "percent " + format_double(s.percent_unavailable));
    return c.outcome("1821/574 gives " + format_fixed(s.percent_unavailable, 4) + "% (within 0.01 of 23.96)");
}

Outcome split_counts() {
    Checker c;
    const auto s = eval::split_indices(176740, {}, 42);
    c.expect(s.train.size() == 141392 && s.validation.size() == 17674 && s.test.size() == 17674, "sizes");
    std::vector<char> seen(176740, 0);
    for (const auto* part : {&s.train, &s.validation, &s.test})
        for (auto i : *part) {
            c.expect(seen[i] == 0, "index " + std::to_string(i) + " repeated");
            seen[i] = 1;
        }
    const auto again = eval::split_indices(176740, {}, 42);
    c.expect(again.train == s.train && again.validation == s.validation && again.test == s.test, "seed stability");
    const auto other = eval::split_indices(176740, {}, 43);
    c.expect(other.test != s.test, "different seed gives a different partition");
    return c.outcome(std::to_string(s.train.size()) + "/" + std::to_string(s.validation.size()) + "/" +
                     std::to_string(s.test.size()) + ", disjoint, seed-stable");
}

Outcome masking_identity() {
    Checker c;
    SplitMix64 rng(1004);
    std::vector<eval::ComponentRecords> groups;
    std::unordered_map<std::string, cvss::Cvss2Vector> truth;
    for (std::size_t i = 0; i < 1000; ++i) {
        if (i % 100 == 0) groups.push_back({"component-" + std::to_string(i / 100), {}});
        auto r = testing::synthetic_record(i, rng);
        truth.emplace(r.cve_id, r.vector);
        groups.back().records.push_back(std::move(r));
    }
    const impute::PerfectOracle oracle(truth);
    double slowest = 0.0;
    std::size_t runs = 0;
    for (const std::uint64_t seed : {1ULL, 42ULL, 2024ULL, 0xdeadbeefULL}) {
        for (const double fraction : {0.01, 0.1, 0.24, 0.5, 0.9, 0.99}) {
            const auto start = std::chrono::steady_clock::now();
            const auto result = eval::masking_experiment(groups, fraction, seed, oracle, 1);
            const double elapsed = seconds_since(start);
            slowest = std::max(slowest, elapsed);
            ++runs;
            const auto tag = "seed " + std::to_string(seed) + " fraction " + format_double(fraction);
            c.expect(result.rows.size() == groups.size(), tag + " row count");
            for (const auto& row : result.rows) {
                c.expect(row.n_masked == eval::masked_count(row.n_records, fraction), tag + " masked count");
                for (const auto& e : {row.impact_error_pct, row.exploitability_error_pct, row.base_error_pct})
                    c.expect(!e || *e == 0.0, tag + " error");
                c.expect(row.impact_bias == 0.0 && row.exploitability_bias == 0.0 && row.base_bias == 0.0, tag + " bias");
            }
            c.expect(elapsed < 10.0, tag + " runtime " + secs(elapsed));
        }
    }
    return c.outcome(std::to_string(runs) + " seed/fraction runs on 1000 CVEs all exactly 0.0, slowest " + secs(slowest));
}

std::vector<nvd::CveRecord> load_slice(const fs::path& path) {
    auto store = nvd::NvdStore::in_memory();
    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& e : fs::directory_iterator(path))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(path);
    }
    for (const auto& f : files) {
        const auto text = read_file(f);
        store.ingest_parsed(nvd::parse_feed(text, nvd::detect_feed_format(text)));
    }
    return store.records();
}

Outcome learnability() {
    const char* slice = std::getenv("VULNRISK_NVD_SLICE");
    if (slice == nullptr || *slice == '\0') {
        return {Verdict::Skip, "needs a real NVD slice via VULNRISK_NVD_SLICE; none is available offline"};
    }
    if (!fs::exists(slice)) return {Verdict::Fail, std::string("VULNRISK_NVD_SLICE does not exist: ") + slice};
    const auto start = std::chrono::steady_clock::now();
    Checker c;
    const auto stop = text::StopWords::builtin();
    impute::BaselineConfig config;
    const auto corpus = impute::build_corpus(load_slice(slice), stop, config.max_tokens);
    const auto result = impute::train_baseline(corpus.examples, config, stop);
    std::ostringstream detail;
    detail << corpus.examples.size() << " records;";
    std::size_t trainable = 0;
    for (const auto& task : result.report.tasks) {
        if (task.degenerate) continue;
        ++trainable;
        const auto key = std::string(cvss::metric_key(task.metric));
        detail << " " << key << " " << format_fixed(task.test_metrics.accuracy, 3) << ">"
               << format_fixed(task.majority_frequency, 3);
        c.expect(task.test_metrics.accuracy > task.majority_frequency, key + " does not beat majority");
    }
    c.expect(trainable > 0, "no trainable task");
    const double elapsed = seconds_since(start);
    c.expect(elapsed < 300.0, "runtime " + secs(elapsed));
    detail << "; " << secs(elapsed);
    return c.outcome(detail.str());
}

Outcome metric_suite() {
    Checker c;
    SplitMix64 rng(1005);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 2 + rng.below(5);
        const std::size_t n = 1 + rng.below(200);
        std::vector<std::size_t> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng.below(k);
            p[i] = rng.below(3) == 0 ? t[i] : rng.below(k);
        }
        const auto r = eval::classification_metrics(t, p, k);
        c.expect(std::abs(r.f1_micro - r.accuracy) <= 1e-12, "trial " + std::to_string(trial));
    }
    const auto toy = eval::classification_metrics(std::vector<std::size_t>{0, 0, 1, 2}, std::vector<std::size_t>{0, 1, 1, 2}, 3);
    c.expect(toy.accuracy == 0.75, "toy accuracy");
    c.expect(std::abs(toy.f1_micro - 0.75) <= 1e-12, "toy f1_micro");
    return c.outcome("f1_micro = accuracy on 1000 cases; toy confusion matrix gives " + format_fixed(toy.accuracy, 2));
}

Outcome error_and_bias() {
    Checker c;
    c.expect(eval::percentage_error(5.0, 4.5) == 10.0, "true 5.0 pred 4.5");
    c.expect(eval::percentage_error(3.3, 3.3) == 0.0, "equal values");
    c.expect(!eval::percentage_error(0.0, 1.0).has_value(), "zero true value");
    c.expect(std::abs(eval::bias(7.5, 7.6) - (-0.1)) <= 1e-12, "true 7.5 pred 7.6");
    c.expect(eval::bias(4.0, 4.0) == 0.0, "equal bias");
    c.expect((eval::bias(1.1, 1.0) + eval::bias(1.0, 1.1)) / 2.0 == 0.0, "cancellation");

    // All-None impacts give true impact and base 0; masking both must count them.
    std::vector<eval::ComponentRecords> groups{{"db", {}}};
    std::unordered_map<std::string, cvss::Cvss2Vector> truth;
    for (int i = 0; i < 4; ++i) {
        nvd::CveRecord r{testing::cve_id(static_cast<std::size_t>(i)), "no impact", cvss::parse_vector("AV:N/AC:L/Au:N/C:N/I:N/A:N"),
                         "2020-01-01"};
        truth.emplace(r.cve_id, r.vector);
        groups[0].records.push_back(r);
    }
    const impute::PerfectOracle oracle(truth);
    const auto result = eval::masking_experiment(groups, 0.5, 5, oracle);
    c.expect(result.zero_true_excluded.impact == 2, "impact exclusions " + std::to_string(result.zero_true_excluded.impact));
    c.expect(result.zero_true_excluded.base == 2, "base exclusions " + std::to_string(result.zero_true_excluded.base));
    c.expect(!result.rows[0].impact_error_pct.has_value(), "impact error mean left empty");
    return c.outcome("formula examples exact; 2 all-None records masked, 2 impact and 2 base exclusions counted");
}

struct Criterion {
    const char* name;
    std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all{
        {"cvss-oracle-equivalence", cvss_oracle},
        {"label-weight-identity", label_weights},
        {"weighted-loss-reduction", weighted_loss},
        {"completeness-statistics", completeness},
        {"split-counts", split_counts},
        {"masking-identity", masking_identity},
        {"baseline-learnability", learnability},
        {"metric-suite", metric_suite},
        {"error-bias-formulas", error_and_bias},
    };
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string only = argc > 1 ? argv[1] : "";
    std::size_t failed = 0;
    std::size_t skipped = 0;
    std::size_t ran = 0;
    for (const auto& criterion : criteria()) {
        if (!only.empty() && only != criterion.name && !(only == "learnability" && std::string(criterion.name) == "baseline-learnability")) {
            continue;
        }
        ++ran;
        Outcome o;
        try {
            o = criterion.run();
        } catch (const std::exception& e) {
            o = {Verdict::Fail, std::string("exception: ") + e.what()};
        }
        const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "SKIP";
        std::cout << tag << "  " << criterion.name << "  " << o.detail << std::endl;
        failed += o.verdict == Verdict::Fail ? 1 : 0;
        skipped += o.verdict == Verdict::Skip ? 1 : 0;
    }
    if (ran == 0) {
        std::cerr << "unknown criterion '" << only << "'\n";
        return 2;
    }
    if (failed > 0) return 1;
    if (!only.empty() && skipped == ran) return 77;
    return 0;
}
