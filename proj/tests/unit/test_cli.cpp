// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "vulnrisk/common.hpp"
#include "vulnrisk/error.hpp"

using namespace vulnrisk;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("vulnrisk-cli-" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

// Legacy-format feed: `complete` records with a v2 vector, then `missing`
// records without one.
std::string legacy_feed(std::size_t complete, std::size_t missing, std::uint64_t seed = 7) {
    nlohmann::json items = nlohmann::json::array();
    SplitMix64 rng(seed);
    for (std::size_t n = 0; n < complete + missing; ++n) {
        const auto r = testing::synthetic_record(n, rng);
        nlohmann::json item;
        item["cve"]["CVE_data_meta"]["ID"] = r.cve_id;
        item["cve"]["description"]["description_data"] = {{{"lang", "en"}, {"value", r.description}}};
        item["impact"] = nlohmann::json::object();
        if (n < complete) item["impact"]["baseMetricV2"]["cvssV2"]["vectorString"] = r.vector.to_string();
        item["publishedDate"] = "2020-01-01T00:00Z";
        items.push_back(item);
    }
    return nlohmann::json{{"CVE_data_type", "CVE"}, {"CVE_Items", items}}.dump();
}

std::vector<std::string> base_args(const TempDir& dir) {
    return {"--store", (dir.path / "store").string(), "--output-dir", (dir.path / "out").string()};
}

std::vector<std::string> with(std::vector<std::string> args, std::initializer_list<std::string> more) {
    args.insert(args.end(), more);
    return args;
}

void ingest(const TempDir& dir, std::size_t complete, std::size_t missing) {
    const auto feed = dir.path / "feed.json";
    write_file_atomic(feed, legacy_feed(complete, missing));
    const auto r = invoke(with(base_args(dir), {"ingest-nvd", feed.string()}));
    REQUIRE_MESSAGE(r.code == 0, r.err);
}

std::string fixture(const std::string& name) { return std::string(VULNRISK_FIXTURES) + "/" + name; }

}  // namespace

TEST_CASE("stats reports 23.96% unavailable for 1821 complete and 574 incomplete records") {
    TempDir dir("stats");
    ingest(dir, 1821, 574);
    const auto r = invoke(with(base_args(dir), {"stats", "--export"}));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("(23.96% unavailable)") != std::string::npos);
    const auto stats = nlohmann::json::parse(read_file(dir.path / "out" / "stats.json"));
    CHECK(stats["available"] == 1821);
    CHECK(stats["unavailable"] == 574);
    CHECK(fs::exists(dir.path / "out" / "nvd_export.csv"));
}

TEST_CASE("evaluate with the perfect oracle writes an all-zero error table") {
    TempDir dir("oracle");
    ingest(dir, 200, 10);
    const auto r = invoke(with(base_args(dir), {"evaluate", "--mask", "0.3", "--model", "perfect-oracle"}));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(read_file(dir.path / "out" / "error_table.csv") ==
          "component,impact_error_pct,exploitability_error_pct,base_error_pct\nstore,0.0000,0.0000,0.0000\n");
    const auto masking = nlohmann::json::parse(read_file(dir.path / "out" / "masking.json"));
    CHECK(masking.dump().find("\"n_masked\":60") != std::string::npos);
}

TEST_CASE("assess without a model fails with exit 50 on an incomplete record") {
    TempDir dir("assess-none");
    const auto a = invoke(with(base_args(dir), {"ingest-nvd", fixture("nvd-api2-small.json")}));
    REQUIRE_MESSAGE(a.code == 0, a.err);
    const auto r = invoke(with(base_args(dir), {"assess", "--scan", fixture("scan-small.csv"), "--model", "none"}));
    CHECK(r.code == 50);
    CHECK(r.err.find("CVE-2023-0286") != std::string::npos);
}

TEST_CASE("train, impute and assess form a working pipeline") {
    TempDir dir("pipeline");
    ingest(dir, 400, 20);
    auto r = invoke(with(base_args(dir), {"train-baseline", "--epochs", "30"}));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    r = invoke(with(base_args(dir), {"impute"}));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("imputed 20 of 20") != std::string::npos);
    const auto predictions = read_file(dir.path / "out" / "predictions.ndjson");
    CHECK(std::count(predictions.begin(), predictions.end(), '\n') == 20);

    const auto scan = dir.path / "scan.csv";
    write_file_atomic(scan, "component,cve_id\nweb," + testing::cve_id(3) + "\nweb," + testing::cve_id(405) +
                                "\ndb," + testing::cve_id(410) + "\n");
    r = invoke(with(base_args(dir), {"assess", "--scan", scan.string(), "--model", "predictions", "--predictions",
                                  (dir.path / "out" / "predictions.ndjson").string()}));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto components = nlohmann::json::parse(read_file(dir.path / "out" / "components.json"));
    CHECK(components.dump().find("\"db\"") != std::string::npos);
    CHECK(fs::exists(dir.path / "out" / "cves.csv"));

    r = invoke(with(base_args(dir), {"assess", "--scan", scan.string(), "--model", "baseline"}));
    CHECK_MESSAGE(r.code == 0, r.err);
}

TEST_CASE("impute through an external model process") {
    TempDir dir("external");
    ingest(dir, 10, 5);
    const auto r = invoke(with(base_args(dir), {"--endpoint", std::string("exec:") + VULNRISK_FAKE_SERVER + " fixed",
                                             "impute", "--model", "external"}));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("imputed 5 of 5") != std::string::npos);
    const auto illegal = invoke(with(base_args(dir), {"--endpoint", std::string("exec:") + VULNRISK_FAKE_SERVER + " illegal",
                                                   "impute", "--model", "external"}));
    CHECK(illegal.code == static_cast<int>(ErrorCode::IllegalLabel));
}

TEST_CASE("reruns produce byte-identical outputs and manifests") {
    TempDir dir("rerun");
    ingest(dir, 300, 15);
    const std::vector<std::vector<std::string>> steps = {
        {"train-baseline", "--epochs", "10"}, {"impute"}, {"evaluate", "--model", "baseline"}, {"stats"}};
    std::map<std::string, std::string> first;
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& step : steps) {
            auto args = base_args(dir);
            args.insert(args.end(), step.begin(), step.end());
            const auto r = invoke(args);
            REQUIRE_MESSAGE(r.code == 0, r.err);
        }
        for (const auto& entry : fs::directory_iterator(dir.path / "out")) {
            const auto name = entry.path().filename().string();
            const auto content = read_file(entry.path());
            if (pass == 0) {
                first[name] = content;
            } else {
                CHECK_MESSAGE(first[name] == content, name);
            }
        }
    }
    CHECK(first.count("train-baseline.manifest.json") == 1);
    CHECK(first.count("evaluate.manifest.json") == 1);
}

TEST_CASE("config file, environment and flags apply in that order") {
    TempDir dir("precedence");
    const auto config = dir.path / "run.conf";
    write_file_atomic(config, "# comment\nstore_path = " + (dir.path / "from-config").string() +
                                  "\nsplit_seed=9\noutput_dir=" + (dir.path / "out").string() + "\n");
    const auto store_of = [&](const std::vector<std::string>& args) {
        const auto r = invoke(args);
        REQUIRE_MESSAGE(r.code == 0, r.err);
        const auto manifest = nlohmann::json::parse(read_file(dir.path / "out" / "stats.manifest.json"));
        CHECK(manifest["seed"] == 9);
        return manifest["config"]["store_path"].get<std::string>();
    };
    ::unsetenv("VULNRISK_STORE");
    CHECK(store_of({"--config", config.string(), "stats"}) == (dir.path / "from-config").string());
    ::setenv("VULNRISK_STORE", (dir.path / "from-env").string().c_str(), 1);
    CHECK(store_of({"--config", config.string(), "stats"}) == (dir.path / "from-env").string());
    CHECK(store_of({"--config", config.string(), "--store", (dir.path / "from-flag").string(), "stats"}) ==
          (dir.path / "from-flag").string());
    ::unsetenv("VULNRISK_STORE");
}

TEST_CASE("configuration and usage errors map to their exit codes") {
    TempDir dir("errors");
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"no-such-command"}).code == 2);
    CHECK(invoke({"--version"}).code == 0);
    CHECK(invoke(with(base_args(dir), {"--max-tokens", "5", "stats"})).code == 3);
    CHECK(invoke(with(base_args(dir), {"evaluate", "--mask", "1.0", "--model", "perfect-oracle"})).code == 3);
    CHECK(invoke(with(base_args(dir), {"evaluate", "--mask", "0", "--model", "perfect-oracle"})).code == 3);
    CHECK(invoke(with(base_args(dir), {"impute", "--model", "external"})).code == 3);
    CHECK(invoke(with(base_args(dir), {"train-baseline"})).code == static_cast<int>(ErrorCode::EmptyDataset));
    const auto conf = dir.path / "bad.conf";
    write_file_atomic(conf, "colour=blue\n");
    const auto r = invoke({"--config", conf.string(), "stats"});
    CHECK(r.code == 3);
    CHECK(r.err.find("bad.conf:1") != std::string::npos);
}

TEST_CASE("config text parsing") {
    cli::PipelineConfig c;
    cli::apply_config_text(c, "model = external(tcp:localhost:9000)\nmask_fraction=0.5\nworkers=4\n\n", "t");
    CHECK(c.model == "external");
    CHECK(c.endpoint == "tcp:localhost:9000");
    CHECK(c.mask_fraction == 0.5);
    CHECK(c.workers == 4);
    CHECK_THROWS_AS(cli::apply_config_text(c, "max_tokens=ten\n", "t"), Error);
    CHECK_THROWS_AS(cli::apply_config_text(c, "just words\n", "t"), Error);
    c.mask_fraction = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
}
