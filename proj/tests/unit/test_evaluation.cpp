// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "vulnrisk/common.hpp"
#include "vulnrisk/error.hpp"
#include "vulnrisk/evaluation.hpp"

using namespace vulnrisk;
using namespace vulnrisk::eval;

namespace {

// Keeps the true exploitability labels and claims Complete on all impacts.
class AllCompleteImpacts final : public impute::Imputer {
public:
    explicit AllCompleteImpacts(std::unordered_map<std::string, cvss::Cvss2Vector> truth) : truth_(std::move(truth)) {}
    [[nodiscard]] std::string_view name() const noexcept override { return "all-complete"; }
    impute::Prediction predict(const std::string& id, const std::string&) const override {
        impute::Prediction p;
        p.cve_id = id;
        auto v = truth_.at(id);
        v.set(cvss::Metric::ConfidentialityImpact, cvss::Label::Complete);
        v.set(cvss::Metric::IntegrityImpact, cvss::Label::Complete);
        v.set(cvss::Metric::AvailabilityImpact, cvss::Label::Complete);
        for (auto m : cvss::kAllMetrics) p.metrics[static_cast<std::size_t>(m)] = {*v.get(m), 1.0};
        return p;
    }

private:
    std::unordered_map<std::string, cvss::Cvss2Vector> truth_;
};

nvd::CveRecord record(const std::string& id, const std::string& vector) {
    return {id, "description of " + id, cvss::parse_vector(vector), "2020-01-01"};
}

std::unordered_map<std::string, cvss::Cvss2Vector> truth_of(const std::vector<ComponentRecords>& groups) {
    std::unordered_map<std::string, cvss::Cvss2Vector> truth;
    for (const auto& g : groups)
        for (const auto& r : g.records) truth[r.cve_id] = r.vector;
    return truth;
}

std::vector<ComponentRecords> random_groups(SplitMix64& rng, std::size_t n_groups, std::size_t max_size) {
    std::vector<ComponentRecords> groups;
    std::size_t next = 0;
    for (std::size_t g = 0; g < n_groups; ++g) {
        ComponentRecords group{"svc-" + std::to_string(g), {}};
        const auto size = 1 + rng.below(max_size);
        for (std::size_t i = 0; i < size; ++i) group.records.push_back(testing::synthetic_record(next++, rng));
        groups.push_back(std::move(group));
    }
    return groups;
}

}  // namespace

TEST_CASE("split counts") {
    const auto s = split_indices(100, {}, 1);
    CHECK(s.train.size() == 80);
    CHECK(s.validation.size() == 10);
    CHECK(s.test.size() == 10);
    const auto big = split_indices(176740, {}, 42);
    CHECK(big.train.size() == 141392);
    CHECK(big.validation.size() == 17674);
    CHECK(big.test.size() == 17674);
    CHECK_THROWS_AS((void)split_indices(10, {0.5, 0.2, 0.2}, 1), Error);
}

TEST_CASE("split is disjoint, exhaustive and seed-stable") {
    SplitMix64 rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = rng.below(3000);
        const auto seed = rng.next();
        const auto s = split_indices(n, {}, seed);
        std::set<std::size_t> all;
        for (const auto* part : {&s.train, &s.validation, &s.test}) all.insert(part->begin(), part->end());
        CHECK(all.size() == n);
        CHECK(s.train.size() + s.validation.size() + s.test.size() == n);
        if (n > 0) CHECK(*all.rbegin() == n - 1);
        const auto again = split_indices(n, {}, seed);
        CHECK(again.train == s.train);
        CHECK(again.test == s.test);
    }
}

TEST_CASE("split_dataset keeps records with their indices") {
    std::vector<int> data(50);
    for (int i = 0; i < 50; ++i) data[static_cast<std::size_t>(i)] = i * 10;
    const auto idx = split_indices(data.size(), {}, 9);
    const auto split = split_dataset(data, {}, 9);
    REQUIRE(split.test.size() == idx.test.size());
    for (std::size_t i = 0; i < idx.test.size(); ++i) CHECK(split.test[i] == data[idx.test[i]]);
}

TEST_CASE("classification metrics: toy confusion matrix") {
    const std::vector<std::size_t> truth{0, 0, 1, 2};
    const std::vector<std::size_t> pred{0, 1, 1, 2};
    const auto r = classification_metrics(truth, pred, 3);
    CHECK(r.accuracy == 0.75);
    CHECK(std::abs(r.f1_micro - 0.75) < 1e-12);
    CHECK(r.confusion[0][1] == 1);
    // class 0: p=1 r=.5 f=2/3; class 1: p=.5 r=1 f=2/3; class 2: 1
    CHECK(std::abs(r.precision_weighted - (0.5 * 1.0 + 0.25 * 0.5 + 0.25)) < 1e-12);
    CHECK(std::abs(r.recall_weighted - (0.5 * 0.5 + 0.25 + 0.25)) < 1e-12);
    CHECK(std::abs(r.f1_weighted - (0.75 * 2.0 / 3.0 + 0.25)) < 1e-12);
}

TEST_CASE("classification metrics: perfect and majority predictors") {
    const std::vector<std::size_t> truth{0, 1, 2, 1, 0};
    const auto perfect = classification_metrics(truth, truth, 3);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.precision_weighted == 1.0);
    CHECK(perfect.recall_weighted == 1.0);
    CHECK(perfect.f1_weighted == 1.0);
    CHECK(perfect.f1_micro == 1.0);

    std::vector<std::size_t> imbalanced(90, 0);
    imbalanced.insert(imbalanced.end(), 10, 1);
    const std::vector<std::size_t> majority(100, 0);
    const auto m = classification_metrics(imbalanced, majority, 2);
    CHECK(std::abs(m.accuracy - 0.9) < 1e-12);
    CHECK(m.f1_weighted < 0.9);
    CHECK(std::abs(m.f1_weighted - 0.9 * (2 * 0.9 / 1.9)) < 1e-12);
}

TEST_CASE("classification metrics: f1_micro equals accuracy") {
    SplitMix64 rng(43);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 2 + rng.below(5);
        const std::size_t n = 1 + rng.below(200);
        std::vector<std::size_t> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng.below(k);
            p[i] = rng.below(3) == 0 ? t[i] : rng.below(k);
        }
        const auto r = classification_metrics(t, p, k);
        CHECK(std::abs(r.f1_micro - r.accuracy) <= 1e-12);
    }
}

TEST_CASE("classification metrics: input errors") {
    const std::vector<std::size_t> a{0, 1};
    const std::vector<std::size_t> b{0};
    try {
        (void)classification_metrics(a, b, 2);
        FAIL("expected LengthMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LengthMismatch);
    }
    CHECK_THROWS_AS((void)classification_metrics(a, a, 1), Error);
    CHECK_THROWS_AS((void)classification_metrics(std::vector<std::size_t>{}, std::vector<std::size_t>{}, 2), Error);
}

TEST_CASE("percentage error and bias") {
    CHECK(std::abs(*percentage_error(5.0, 4.5) - 10.0) < 1e-12);
    CHECK(*percentage_error(3.3, 3.3) == 0.0);
    CHECK_FALSE(percentage_error(0.0, 1.0).has_value());
    CHECK(*percentage_error(5.0, 5.5) == doctest::Approx(10.0));
    CHECK(std::abs(bias(7.5, 7.6) - (-0.1)) < 1e-12);
    CHECK(bias(4.0, 4.0) == 0.0);
    CHECK((bias(1.1, 1.0) + bias(1.0, 1.1)) / 2.0 == doctest::Approx(0.0));
}

TEST_CASE("percentage error is scale-invariant") {
    SplitMix64 rng(47);
    for (int trial = 0; trial < 500; ++trial) {
        const double t = 0.1 + 10.0 * rng.uniform();
        const double p = 10.0 * rng.uniform();
        const double s = 0.01 + 100.0 * rng.uniform();
        CHECK(std::abs(*percentage_error(t, p) - *percentage_error(s * t, s * p)) <= 1e-9 * (1.0 + *percentage_error(t, p)));
    }
}

TEST_CASE("masked_count uses the ceiling") {
    CHECK(masked_count(10, 0.24) == 3);
    CHECK(masked_count(10, 0.3) == 3);
    CHECK(masked_count(4, 0.24) == 1);
    CHECK(masked_count(100, 0.24) == 24);
    CHECK(masked_count(5, 0.0) == 0);
}

TEST_CASE("masking with a perfect oracle is exactly zero") {
    SplitMix64 rng(53);
    for (int trial = 0; trial < 20; ++trial) {
        const auto groups = random_groups(rng, 1 + rng.below(6), 30);
        const impute::PerfectOracle oracle(truth_of(groups));
        const double fraction = 0.01 + 0.98 * rng.uniform();
        const auto result = masking_experiment(groups, fraction, rng.next(), oracle, 1 + rng.below(4));
        for (const auto& row : result.rows) {
            CHECK(row.n_masked == masked_count(row.n_records, fraction));
            for (const auto& e : {row.impact_error_pct, row.exploitability_error_pct, row.base_error_pct}) {
                if (e) CHECK(*e == 0.0);
            }
            CHECK(row.impact_bias == 0.0);
            CHECK(row.exploitability_bias == 0.0);
            CHECK(row.base_bias == 0.0);
        }
        for (const auto& g : groups) {
            if (g.records.size() < 2) {
                CHECK(std::any_of(result.skipped.begin(), result.skipped.end(),
                                  [&](const auto& s) { return s.component == g.component; }));
            }
        }
    }
}

TEST_CASE("masking with fraction 0 compares nothing") {
    SplitMix64 rng(59);
    const auto groups = random_groups(rng, 4, 20);
    const impute::PerfectOracle oracle(truth_of(groups));
    const auto result = masking_experiment(groups, 0.0, 1, oracle);
    CHECK(result.cves.empty());
    for (const auto& row : result.rows) {
        CHECK(row.n_masked == 0);
        CHECK_FALSE(row.base_error_pct.has_value());
    }
    CHECK_THROWS_AS((void)masking_experiment(groups, 1.0, 1, oracle), Error);
    CHECK_THROWS_AS((void)masking_experiment(groups, -0.1, 1, oracle), Error);
}

TEST_CASE("overstated impacts give positive error and negative bias") {
    const std::vector<ComponentRecords> groups{{"carts",
                                                {record("CVE-2020-0001", "AV:N/AC:L/Au:N/C:P/I:N/A:N"),
                                                 record("CVE-2020-0002", "AV:N/AC:M/Au:N/C:P/I:P/A:N"),
                                                 record("CVE-2020-0003", "AV:L/AC:L/Au:N/C:P/I:P/A:P")}}};
    const AllCompleteImpacts imputer(truth_of(groups));
    const auto result = masking_experiment(groups, 0.99, 7, imputer);
    REQUIRE(result.rows.size() == 1);
    const auto& row = result.rows[0];
    CHECK(row.n_masked == 3);
    // Hand-scored: impacts 2.862, 4.9438..., 6.443 against 10.0 each.
    const double i1 = 10.41 * (1 - 0.725);
    const double i2 = 10.41 * (1 - 0.725 * 0.725);
    const double i3 = 10.41 * (1 - 0.725 * 0.725 * 0.725);
    const double expected_err = ((10 - i1) / i1 + (10 - i2) / i2 + (10 - i3) / i3) * 100.0 / 3.0;
    CHECK(*row.impact_error_pct == doctest::Approx(expected_err).epsilon(1e-12));
    CHECK(row.impact_bias == doctest::Approx((i1 + i2 + i3 - 30.0) / 3.0).epsilon(1e-12));
    CHECK(*row.impact_error_pct > 0.0);
    CHECK(row.impact_bias < 0.0);
    CHECK(row.exploitability_bias == 0.0);
    CHECK(*row.exploitability_error_pct == 0.0);
}

TEST_CASE("zero true scores are excluded and counted") {
    const std::vector<ComponentRecords> groups{{"db",
                                                {record("CVE-2020-0001", "AV:N/AC:L/Au:N/C:N/I:N/A:N"),
                                                 record("CVE-2020-0002", "AV:N/AC:L/Au:N/C:N/I:N/A:N")}}};
    const AllCompleteImpacts imputer(truth_of(groups));
    const auto result = masking_experiment(groups, 0.5, 3, imputer);
    CHECK(result.zero_true_excluded.impact == 1);
    CHECK(result.zero_true_excluded.base == 1);
    CHECK(result.zero_true_excluded.exploitability == 0);
    CHECK_FALSE(result.rows[0].impact_error_pct.has_value());
    CHECK(result.rows[0].impact_bias == -10.0);
    CHECK(error_table_csv(result) == "component,impact_error_pct,exploitability_error_pct,base_error_pct\ndb,,0.0000,\n");
}

TEST_CASE("masking is deterministic and rejects incomplete ground truth") {
    SplitMix64 rng(61);
    const auto groups = random_groups(rng, 5, 40);
    const AllCompleteImpacts imputer(truth_of(groups));
    const auto a = masking_experiment(groups, 0.24, 99, imputer, 1);
    const auto b = masking_experiment(groups, 0.24, 99, imputer, 4);
    CHECK(error_table_csv(a) == error_table_csv(b));
    CHECK(bias_table_csv(a) == bias_table_csv(b));
    CHECK(masking_json(a) == masking_json(b));

    auto broken = groups;
    broken[0].records[0].vector.set(cvss::Metric::AccessVector, std::nullopt);
    CHECK_THROWS_AS((void)masking_experiment(broken, 0.24, 1, imputer), Error);
}
