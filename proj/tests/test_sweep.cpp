#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blocktune/error.hpp"
#include "blocktune/sweep.hpp"
#include "blocktune/text.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

using namespace blocktune;
using namespace blocktune::sweep;
using build::RunOutcome;
using build::RunStatus;
namespace fs = std::filesystem;
using testsupport::TempDir;

namespace {

std::vector<SweepUnit> fixture_units(int n) {
    std::vector<SweepUnit> units;
    for (int i = 0; i < n; ++i) {
        auto id = std::to_string(i) + "-k" + std::to_string(i) + ".cu-kernel";
        units.push_back({{id, "/nonexistent", "/nonexistent", true}, "kernel", static_cast<std::size_t>(i)});
    }
    return units;
}

std::set<RowKey> all_keys(const std::vector<SweepUnit>& units, const SweepSpace& space) {
    std::set<RowKey> keys;
    for (const auto& u : units) {
        for (const auto& m : space.matrices) {
            for (const auto& b : space.blocks) keys.insert({u.handle.id, m, b});
        }
    }
    return keys;
}

std::set<RowKey> keys_of(const std::vector<DatasetRow>& rows) {
    std::set<RowKey> keys;
    for (const auto& r : rows) keys.insert(row_key(r));
    return keys;
}

SweepOptions options_in(const TempDir& tmp, std::vector<int> devices = {0}) {
    SweepOptions o;
    o.devices = std::move(devices);
    o.jsonl = tmp / "dataset.jsonl";
    o.csv = tmp / "dataset.csv";
    return o;
}

// Scripted backend: records every call and answers from a callback.
class ScriptedExecutor final : public build::Executor {
public:
    using Answer = std::function<RunOutcome(const build::UnitHandle&, const LaunchConfig&, int call)>;
    explicit ScriptedExecutor(Answer answer) : answer_(std::move(answer)) {}
    build::BackendKind kind() const override { return build::BackendKind::simulated; }
    build::BuildResult compile(const build::UnitHandle& u) override { return {u.id, build::BuildStatus::ok, 1, {}}; }
    RunOutcome run(const build::UnitHandle& u, const LaunchConfig& l, double, int) override {
        int call;
        {
            std::lock_guard lock(mutex_);
            call = calls_[{u.id, l.matrix, l.block}]++;
        }
        return answer_(u, l, call);
    }
    std::map<RowKey, int> calls() const { return calls_; }

private:
    Answer answer_;
    std::mutex mutex_;
    std::map<RowKey, int> calls_;
};

RunOutcome outcome(RunStatus s, double ms = NAN) {
    RunOutcome r;
    r.status = s;
    r.runtime_ms = s == RunStatus::ok ? ms : NAN;
    return r;
}

}  // namespace

TEST_CASE("canonical space") {
    auto space = canonical_space();
    CHECK(space.blocks.size() == 20);
    CHECK(space.size() == 140);
    CHECK_NOTHROW(space.validate());
    for (const auto& b : space.blocks) {
        CHECK(b.threads() <= 1024);
        CHECK(b.threads() % 32 == 0);
    }
    CHECK(canonical_space({{100, 100}}).size() == 20);
}

TEST_CASE("space validation") {
    CHECK_THROWS_AS((SweepSpace{{}, canonical_blocks()}.validate()), ContractViolation);
    CHECK_THROWS_AS((SweepSpace{{{8, 8}}, {}}.validate()), ContractViolation);
    CHECK_THROWS_AS((SweepSpace{{{8, 8}}, {{64, 1, 1}, {64, 1, 1}}}.validate()), ContractViolation);
    CHECK_THROWS_AS((SweepSpace{{{8, 8}}, {{48, 1, 1}}}.validate()), ContractViolation);
    CHECK_THROWS_AS((SweepSpace{{{8, 8}, {8, 8}}, {{64, 1, 1}}}.validate()), ContractViolation);
}

TEST_CASE("option validation") {
    TempDir tmp;
    build::SimulatedExecutor exec({});
    auto units = fixture_units(1);
    auto o = options_in(tmp);
    o.repeats = 0;
    CHECK_THROWS_AS(run_sweep(units, canonical_space(), exec, o), ContractViolation);
    o = options_in(tmp, {0, 0});
    CHECK_THROWS_AS(run_sweep(units, canonical_space(), exec, o), ContractViolation);
    o = options_in(tmp, {});
    CHECK_THROWS_AS(run_sweep(units, canonical_space(), exec, o), ContractViolation);
    o = options_in(tmp);
    o.timeout_s = 0;
    CHECK_THROWS_AS(run_sweep(units, canonical_space(), exec, o), ContractViolation);
    o = options_in(tmp);
    o.jsonl.clear();
    CHECK_THROWS_AS(run_sweep(units, canonical_space(), exec, o), ContractViolation);
}

TEST_CASE("three units over the canonical space give 420 ok rows") {
    TempDir tmp;
    build::SimulatedExecutor exec({.seed = 1});
    auto units = fixture_units(3);
    auto space = canonical_space();
    auto r = run_sweep(units, space, exec, options_in(tmp, {0, 1}));
    CHECK(r.executed == 420);
    CHECK(r.skipped == 0);
    REQUIRE(r.rows.size() == 420);
    for (const auto& row : r.rows) {
        CHECK(row.status == RunStatus::ok);
        CHECK(std::isfinite(row.runtime_ms));
        CHECK(!validate_row(row));
        // With the deterministic simulator every repeat agrees.
        CHECK(row.runtime_ms == build::simulated_runtime(exec.model(), row.unit_id, make_launch(row.block, row.matrix)));
    }
    CHECK(keys_of(r.rows) == all_keys(units, space));

    auto csv = read_csv(tmp / "dataset.csv");
    CHECK(csv.size() == 420);
    CHECK(testsupport::read_lines(tmp / "dataset.csv").front() == kCsvHeader);
    CHECK(keys_of(csv).size() == 420);
    // Compaction order: unit, matrix order of the space, block order.
    CHECK(csv[0].unit_id == units[0].handle.id);
    CHECK(csv[0].matrix == space.matrices[0]);
    CHECK(csv[1].block == space.blocks[1]);
    CHECK(csv[20].matrix == space.matrices[1]);
}

TEST_CASE("a unit whose binary always hangs yields 140 timeout rows") {
    TempDir tmp;
    auto unit_dir = tmp / "u";
    fs::create_directories(unit_dir);
    write_file(unit_dir / "params.json", R"({"function":"hang","params":[]})");
    testsupport::write_executable(tmp / "fakecc", "#!/bin/sh\nprintf '#!/bin/sh\\nexec sleep 30\\n' > \"$1\"\nchmod +x \"$1\"\n");
    build::CompilerConfig cc;
    cc.compiler = (tmp / "fakecc").string();
    cc.command_template = "{compiler} {out}";
    build::RealExecutor exec(cc);

    std::vector<SweepUnit> units{{{"hang", unit_dir, tmp.path(), true}, "hang", 0}};
    auto o = options_in(tmp, {0, 1, 2, 3});
    o.timeout_s = 0.05;
    o.repeats = 10;
    o.execution_log = tmp / "exec.log";
    auto started = std::chrono::steady_clock::now();
    auto r = run_sweep(units, canonical_space(), exec, o);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    REQUIRE(r.rows.size() == 140);
    for (const auto& row : r.rows) {
        CHECK(row.status == RunStatus::timeout);
        CHECK(std::isnan(row.runtime_ms));
        CHECK(row.backend == build::BackendKind::real);
    }
    // Each point stops after its first timeout.
    CHECK(testsupport::read_lines(tmp / "exec.log").size() == 140);
    MESSAGE("hanging sweep took " << wall << " s");
}

TEST_CASE("repeats are aggregated with the chosen strategy") {
    // Call i returns (i + 1) ms, so ten repeats give 1..10.
    SweepSpace space{{{64, 64}}, {{64, 1, 1}, {128, 1, 1}}};

    const std::map<measure::Strategy, double> expected{
        {measure::Strategy::median, 5.5},
        {measure::Strategy::mean, 5.5},
        {measure::Strategy::min, 1.0},
        {measure::Strategy::max, 10.0},
        {measure::Strategy::trimmed_mean_20, 5.5},
    };
    for (const auto& [strategy, value] : expected) {
        TempDir run;
        ScriptedExecutor fresh([](const auto&, const auto&, int call) { return outcome(RunStatus::ok, call + 1.0); });
        auto opts = options_in(run);
        opts.repeats = 10;
        opts.strategy = strategy;
        auto r = run_sweep(fixture_units(1), space, fresh, opts);
        for (const auto& row : r.rows) CHECK(row.runtime_ms == value);
        for (const auto& [key, n] : fresh.calls()) CHECK(n == 10);
    }
}

TEST_CASE("failed repeats are dropped while any repeat succeeds") {
    TempDir tmp;
    SweepSpace space{{{64, 64}}, {{64, 1, 1}, {128, 1, 1}, {256, 1, 1}}};
    ScriptedExecutor exec([](const auto&, const LaunchConfig& l, int call) {
        if (l.block.x == 64) return call % 2 ? outcome(RunStatus::runtime_error) : outcome(RunStatus::ok, 2.0 + call);
        if (l.block.x == 128) return call == 0 ? outcome(RunStatus::parse_error) : outcome(RunStatus::runtime_error);
        return call == 2 ? outcome(RunStatus::timeout) : outcome(RunStatus::ok, 1.0);
    });
    auto o = options_in(tmp);
    o.repeats = 5;
    auto r = run_sweep(fixture_units(1), space, exec, o);
    REQUIRE(r.rows.size() == 3);
    // ok repeats at calls 0, 2, 4 -> 2, 4, 6.
    CHECK(r.rows[0].status == RunStatus::ok);
    CHECK(r.rows[0].runtime_ms == 4.0);
    CHECK(r.rows[1].status == RunStatus::parse_error);
    CHECK(std::isnan(r.rows[1].runtime_ms));
    CHECK(r.rows[2].status == RunStatus::timeout);
    CHECK(std::isnan(r.rows[2].runtime_ms));
    auto calls = exec.calls();
    CHECK(calls.at({r.rows[0].unit_id, {64, 64}, {64, 1, 1}}) == 5);
    CHECK(calls.at({r.rows[0].unit_id, {64, 64}, {256, 1, 1}}) == 3);
}

TEST_CASE("resuming re-executes exactly the missing keys") {
    TempDir tmp;
    auto units = fixture_units(3);
    auto space = canonical_space();
    build::SimulatedExecutor sim({.seed = 2});
    auto o = options_in(tmp, {0, 1, 2});
    run_sweep(units, space, sim, o);

    auto lines = testsupport::read_lines(o.jsonl);
    REQUIRE(lines.size() == 420);
    std::mt19937 rng(4);
    std::shuffle(lines.begin(), lines.end(), rng);
    std::set<RowKey> deleted;
    std::string kept;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i < 210) {
            write_file(tmp / "one.jsonl", lines[i] + "\n");
            deleted.insert(row_key(read_jsonl(tmp / "one.jsonl").at(0)));
        } else {
            kept += lines[i] + "\n";
        }
    }
    write_file(o.jsonl, kept);

    ScriptedExecutor counting([&](const build::UnitHandle& u, const LaunchConfig& l, int) {
        return outcome(RunStatus::ok, build::simulated_runtime(sim.model(), u.id, l));
    });
    auto r = run_sweep(units, space, counting, o);
    CHECK(r.executed == 210);
    CHECK(r.skipped == 210);
    std::set<RowKey> rerun;
    for (const auto& [key, n] : counting.calls()) {
        rerun.insert(key);
        CHECK(n == o.repeats);
    }
    CHECK(rerun == deleted);
    CHECK(keys_of(r.rows) == all_keys(units, space));
    CHECK(keys_of(read_csv(o.csv)).size() == 420);
}

TEST_CASE("a completed sweep is idempotent") {
    TempDir tmp;
    auto units = fixture_units(2);
    build::SimulatedExecutor sim({.seed = 3});
    auto o = options_in(tmp);
    run_sweep(units, canonical_space(), sim, o);
    auto before = read_file(o.jsonl);
    auto r = run_sweep(units, canonical_space(), sim, o);
    CHECK(r.executed == 0);
    CHECK(r.skipped == 280);
    CHECK(read_file(o.jsonl) == before);
}

TEST_CASE("a truncated final line is repaired before appending") {
    TempDir tmp;
    auto units = fixture_units(1);
    build::SimulatedExecutor sim({});
    auto o = options_in(tmp);
    run_sweep(units, canonical_space(), sim, o);
    auto content = read_file(o.jsonl);
    auto last_start = content.rfind('\n', content.size() - 2) + 1;
    write_file(o.jsonl, content.substr(0, last_start + 20));

    auto r = run_sweep(units, canonical_space(), sim, o);
    CHECK(r.executed == 1);
    CHECK(r.rows.size() == 140);
    CHECK(read_jsonl(o.jsonl).size() == 140);
    CHECK(testsupport::read_lines(o.jsonl).size() == 140);
}

TEST_CASE("a backend failure keeps the partial dataset for resume") {
    TempDir tmp;
    auto units = fixture_units(2);
    std::atomic<int> calls{0};
    ScriptedExecutor flaky([&](const auto&, const auto&, int) {
        if (++calls > 50) throw Error("device lost");
        return outcome(RunStatus::ok, 1.0);
    });
    auto o = options_in(tmp, {0, 1});
    o.repeats = 1;
    CHECK_THROWS_AS(run_sweep(units, canonical_space(), flaky, o), Error);
    auto partial = read_jsonl(o.jsonl);
    CHECK(partial.size() >= 49);
    CHECK(partial.size() <= 50);
    CHECK(!fs::exists(o.csv));

    build::SimulatedExecutor sim({});
    auto r = run_sweep(units, canonical_space(), sim, o);
    CHECK(r.executed == 280 - partial.size());
    CHECK(r.rows.size() == 280);
}

TEST_CASE("executions on one device never overlap") {
    TempDir tmp;
    ScriptedExecutor slow([](const auto&, const auto&, int) {
        std::this_thread::sleep_for(std::chrono::microseconds(300));
        return outcome(RunStatus::ok, 1.0);
    });
    auto o = options_in(tmp, {0, 3, 5});
    o.repeats = 2;
    o.execution_log = tmp / "exec.log";
    auto r = run_sweep(fixture_units(1), canonical_space({{240, 240}, {496, 496}}), slow, o);
    CHECK(r.rows.size() == 40);

    std::map<int, std::vector<std::pair<long long, long long>>> by_device;
    for (const auto& line : testsupport::read_lines(o.execution_log)) {
        std::istringstream in(line);
        int device;
        long long start, end;
        in >> device >> start >> end;
        REQUIRE(in);
        CHECK(start <= end);
        by_device[device].push_back({start, end});
    }
    CHECK(by_device.size() == 3);
    std::size_t total = 0;
    for (auto& [device, spans] : by_device) {
        CHECK((device == 0 || device == 3 || device == 5));
        std::sort(spans.begin(), spans.end());
        for (std::size_t i = 1; i < spans.size(); ++i) CHECK(spans[i - 1].second <= spans[i].first);
        total += spans.size();
    }
    CHECK(total == 80);
    for (const auto& row : r.rows) CHECK((row.device_id == 0 || row.device_id == 3 || row.device_id == 5));
}

TEST_CASE("compaction deduplicates keeping the first row") {
    auto a = DatasetRow{};
    a.unit_id = "u";
    a.matrix = {240, 240};
    a.block = {128, 1, 1};
    a.status = RunStatus::ok;
    a.runtime_ms = 1.0;
    auto b = a;
    b.runtime_ms = 2.0;
    auto c = a;
    c.block = {64, 1, 1};
    auto rows = compact({a, b, c}, canonical_space());
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].block == BlockConfig{64, 1, 1});
    CHECK(rows[1].runtime_ms == 1.0);
}

TEST_CASE("timestamps") {
    TempDir tmp;
    build::SimulatedExecutor sim({});
    SweepSpace space{{{8, 8}}, {{64, 1, 1}}};
    auto o = options_in(tmp);
    auto stamped = run_sweep(fixture_units(1), space, sim, o);
    CHECK(std::regex_match(stamped.rows.at(0).timestamp, std::regex(R"(\d{4}-\d\d-\d\dT\d\d:\d\d:\d\dZ)")));
    TempDir other;
    auto p = options_in(other);
    p.timestamps = false;
    CHECK(run_sweep(fixture_units(1), space, sim, p).rows.at(0).timestamp.empty());
}
