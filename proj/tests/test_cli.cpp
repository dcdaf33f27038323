#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blocktune/cli.hpp"
#include "blocktune/dataset.hpp"
#include "blocktune/error.hpp"
#include "blocktune/kernel_extractor.hpp"
#include "blocktune/process.hpp"
#include "blocktune/text.hpp"
#include "test_support.hpp"

#include <json.hpp>

using namespace blocktune;
using testsupport::run_cli;
using testsupport::TempDir;

namespace {

std::string sample_file(const TempDir& tmp) {
    std::string text = "# timings\n";
    for (int i = 1; i <= 40; ++i) text += std::to_string(1.0 + 0.01 * i) + "\n";
    text += "\n9.5\n";
    write_file(tmp / "samples.txt", text);
    return (tmp / "samples.txt").string();
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
    auto none = run_cli({});
    CHECK(none.code == 2);
    CHECK(none.err.find("Usage") != std::string::npos);

    CHECK(run_cli({"frobnicate"}).code == 2);
    CHECK(run_cli({"report", "--no-such-flag"}).code == 2);
    CHECK(run_cli({"analyze"}).code == 2);
    CHECK(run_cli({"report", "--timeout", "0"}).code == 2);
    CHECK(run_cli({"report", "--blocks", "33x1x1"}).code == 2);
    CHECK(run_cli({"report", "--strategy", "mode"}).code == 2);
    CHECK(run_cli({"report", "--devices", "0,0"}).code == 2);
    CHECK(run_cli({"report", "--default-block", "2048"}).code == 2);
    CHECK(run_cli({"mine"}).code == 2);
    CHECK(run_cli({"report", "--download-workers", "0"}).code == 2);
}

TEST_CASE("help exits with 0") {
    auto r = run_cli({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("aggregate-eval") != std::string::npos);
    auto sub = run_cli({"sweep", "--help"});
    CHECK(sub.code == 0);
    CHECK(sub.out.find("--fresh") != std::string::npos);
}

TEST_CASE("stage failures exit with 1") {
    TempDir tmp;
    auto missing = run_cli({"analyze", (tmp / "missing.csv").string()});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("missing.csv") != std::string::npos);

    auto build = run_cli({"build", "--corpus", tmp.path().string()});
    CHECK(build.code == 1);
    CHECK(build.err.find("extract") != std::string::npos);

    write_file(tmp / "bad.csv", "not,a,dataset\n");
    CHECK(run_cli({"report", (tmp / "bad.csv").string()}).code == 1);
}

TEST_CASE("configuration file and flag precedence") {
    TempDir tmp;
    cli::PipelineConfig c;
    write_file(tmp / "a.conf", "# sweep settings\nrepeats = 4\ntimeout=2.5\nmax-fix-attempts = 2\n\nstrategy = min\n");
    cli::apply_config_file(c, tmp / "a.conf");
    CHECK(c.repeats == 4);
    CHECK(c.timeout_s == 2.5);
    CHECK(c.max_fix_attempts == 2);
    CHECK(c.strategy == measure::Strategy::min);
    c.set("repeats", "7");
    CHECK(c.repeats == 7);
    CHECK(c.timeout_s == 2.5);

    c.set("matrices", "240x240, 100x50");
    CHECK(c.matrices == std::vector<MatrixSize>{{240, 240}, {100, 50}});
    c.set("blocks", "64x1x1,8x8");
    CHECK(c.blocks == std::vector<BlockConfig>{{64, 1, 1}, {8, 8, 1}});
    c.set("blocks", "canonical");
    CHECK(c.blocks == canonical_blocks());
    c.set("timestamps", "off");
    CHECK(!c.timestamps);
    CHECK(c.download_workers == 8);
    c.set("download-workers", "3");
    CHECK(c.download_workers == 3);
    c.set("backend", "simulated");
    CHECK(c.backend == build::BackendKind::simulated);

    CHECK_THROWS_AS(c.set("colour", "red"), ConfigError);
    CHECK_THROWS_AS(c.set("repeats", "many"), ConfigError);
    CHECK_THROWS_AS(c.set("seed", "-1"), ConfigError);
    CHECK_THROWS_AS(c.set("matrices", ""), ConfigError);

    write_file(tmp / "b.conf", "repeats 4\n");
    cli::PipelineConfig d;
    CHECK_THROWS_AS(cli::apply_config_file(d, tmp / "b.conf"), ConfigError);
    write_file(tmp / "c.conf", "unknown_key = 1\n");
    CHECK_THROWS_AS(cli::apply_config_file(d, tmp / "c.conf"), ConfigError);
    CHECK_THROWS_AS(cli::apply_config_file(d, tmp / "nothing.conf"), ConfigError);

    cli::PipelineConfig v;
    v.default_block = {512, 1, 1};
    v.blocks = {{64, 1, 1}};
    CHECK_THROWS_AS(v.validate(), ConfigError);
    v.blocks = canonical_blocks();
    CHECK_NOTHROW(v.validate());
    v.compiler_template = "{compiler} {src}";
    CHECK_THROWS_AS(v.validate(), ConfigError);

    // Every advertised non-text key rejects garbage.
    for (const auto& key : cli::config_keys()) {
        if (key == "corpus" || key == "repo_list" || key == "compiler" || key == "compiler_template") continue;
        cli::PipelineConfig probe;
        CHECK_THROWS_WITH_AS(probe.set(key, "\x01"), doctest::Contains("invalid value"), ConfigError);
    }
}

TEST_CASE("flags override the config file") {
    TempDir tmp;
    write_file(tmp / "run.conf", "seed = 5\nrepeats = 3\n");
    auto samples = sample_file(tmp);
    auto from_file = run_cli({"aggregate-eval", samples, "--config", (tmp / "run.conf").string(), "--reps", "50"});
    REQUIRE(from_file.code == 0);
    CHECK(nlohmann::json::parse(from_file.out)["seed"] == 5);
    auto flagged =
        run_cli({"aggregate-eval", samples, "--config", (tmp / "run.conf").string(), "--seed", "9", "--reps", "50"});
    REQUIRE(flagged.code == 0);
    CHECK(nlohmann::json::parse(flagged.out)["seed"] == 9);
}

TEST_CASE("aggregate-eval") {
    TempDir tmp;
    auto samples = sample_file(tmp);
    auto r = run_cli({"aggregate-eval", samples, "--k", "5", "--reps", "200", "--seed", "3"});
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["pool_size"] == 41);
    CHECK(j["sample_size"] == 5);
    CHECK(j["repetitions"] == 200);
    CHECK(j["spreads"].size() == 5);
    CHECK(j["spreads"].contains("trimmed_mean_20"));
    CHECK(j["most_stable"].is_string());
    CHECK(run_cli({"aggregate-eval", samples, "--k", "5", "--reps", "200", "--seed", "3"}).out == r.out);

    CHECK(run_cli({"aggregate-eval", samples, "--k", "100"}).code == 1);
    CHECK(run_cli({"aggregate-eval", (tmp / "none.txt").string()}).code == 1);
}

TEST_CASE("extract writes the manifest") {
    TempDir tmp;
    auto root = testsupport::copy_fixture("corpus", tmp / "corpus");
    auto r = run_cli({"extract", "--corpus", root.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.starts_with("extracted 32 candidates"));
    CHECK(testsupport::read_lines(root / extract::kExtractManifest).size() == 32);
}

TEST_CASE("report and analyze on the mixed fixture") {
    TempDir tmp;
    auto csv = testsupport::fixtures() / "mixed_dataset.csv";
    auto r = run_cli({"report", csv.string()});
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(r.out);
    auto tally = nlohmann::json::parse(read_file(testsupport::fixtures() / "mixed_dataset.tally.json"));
    CHECK(j["rows"] == tally["rows"]);
    CHECK(j["non_nan"] == tally["non_nan"]);
    CHECK(j["status_counts"] == tally["status_counts"]);

    auto a = run_cli({"analyze", csv.string(), "--out", tmp.path().string()});
    REQUIRE(a.code == 0);
    CHECK(std::filesystem::exists(tmp / "report.json"));
    CHECK(std::filesystem::exists(tmp / "profile.csv"));
}

TEST_CASE("simulated end to end run is reproducible") {
    TempDir a, b;
    std::string outputs[2][2];
    int i = 0;
    for (const auto* dir : {&a, &b}) {
        auto root = testsupport::copy_fixture("corpus", *dir / "corpus");
        auto r = run_cli({"all", "--corpus", root.string(), "--backend", "simulated", "--seed", "21", "--workers",
                          "2", "--devices", "0,1", "--no-timestamps", "--matrices", "240x240,1016x1016"});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        CHECK(r.out.find("swept") != std::string::npos);
        outputs[i][0] = read_file(root / "dataset.csv");
        outputs[i][1] = read_file(root / "report.json");
        ++i;
    }
    CHECK(outputs[0][0] == outputs[1][0]);
    CHECK(outputs[0][1] == outputs[1][1]);
    auto rows = parse_csv(outputs[0][0]);
    CHECK(!rows.empty());
    CHECK(rows.size() % 40 == 0);
    for (const auto& row : rows) {
        CHECK(row.timestamp.empty());
        CHECK(row.status == build::RunStatus::ok);
    }
    auto report = nlohmann::json::parse(outputs[0][1]);
    CHECK(report["n_complete"].get<std::size_t>() * 20 == rows.size());
}

TEST_CASE("the installed binary reports exit codes") {
    auto bin = testsupport::cli_binary().string();
    TempDir tmp;
    CHECK(run_process({bin}).exit_code == 2);
    CHECK(run_process({bin, "--help"}).exit_code == 0);
    auto missing = run_process({bin, "analyze", (tmp / "missing.csv").string()});
    CHECK(missing.exit_code == 1);
    CHECK(missing.err.find("missing.csv") != std::string::npos);
    CHECK(run_process({bin, "sweep", "--repeats", "0"}).exit_code == 2);
    auto report = run_process({bin, "report", (testsupport::fixtures() / "mixed_dataset.csv").string()});
    CHECK(report.exit_code == 0);
    CHECK(nlohmann::json::parse(report.out)["rows"] == 12);
}
