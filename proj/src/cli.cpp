#include "blocktune/cli.hpp"

#include "blocktune/analysis.hpp"
#include "blocktune/corpus_miner.hpp"
#include "blocktune/dataset.hpp"
#include "blocktune/error.hpp"
#include "blocktune/harness_synth.hpp"
#include "blocktune/kernel_extractor.hpp"
#include "blocktune/sweep.hpp"
#include "blocktune/text.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <thread>

namespace fs = std::filesystem;

namespace blocktune::cli {

namespace {

constexpr std::string_view kBuildManifest = "build_manifest.jsonl";
constexpr std::string_view kDatasetJsonl = "dataset.jsonl";
constexpr std::string_view kDatasetCsv = "dataset.csv";

std::string normalize_key(std::string_view key) {
    std::string k(trim(key));
    for (auto& c : k) {
        if (c == '-') c = '_';
    }
    return k;
}

template <typename T>
T need(std::optional<T> v, std::string_view key, std::string_view value) {
    if (!v) throw ConfigError("invalid value for " + std::string(key) + ": '" + std::string(value) + "'");
    return *v;
}

template <typename F>
auto parse_list(std::string_view key, std::string_view value, F parse_one) {
    std::vector<decltype(parse_one(std::string_view{}))> out;
    for (const auto& item : split(value, ',')) {
        auto t = trim(item);
        if (t.empty()) continue;
        try {
            out.push_back(parse_one(t));
        } catch (const ContractViolation& e) {
            throw ConfigError("invalid value for " + std::string(key) + ": " + e.what());
        }
    }
    if (out.empty()) throw ConfigError(std::string(key) + " needs at least one entry");
    return out;
}

std::optional<bool> parse_bool(std::string_view s) {
    auto l = to_lower(trim(s));
    if (l == "1" || l == "true" || l == "yes" || l == "on") return true;
    if (l == "0" || l == "false" || l == "no" || l == "off") return false;
    return std::nullopt;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "corpus",  "repo_list", "compiler_template", "compiler", "backend",   "seed",
        "timeout", "repeats",   "strategy",          "matrices", "blocks",    "workers",
        "download_workers", "devices", "max_fix_attempts", "timestamps", "threshold", "gain",     "default_block",
    };
    return keys;
}

void PipelineConfig::set(std::string_view raw_key, std::string_view raw_value) {
    auto key = normalize_key(raw_key);
    auto value = trim(raw_value);
    if (key == "corpus") {
        corpus = std::string(value);
    } else if (key == "repo_list") {
        repo_list = std::string(value);
    } else if (key == "compiler_template") {
        compiler_template = std::string(value);
    } else if (key == "compiler") {
        compiler = std::string(value);
    } else if (key == "backend") {
        backend = need(build::parse_backend(value), key, value);
    } else if (key == "seed") {
        auto v = need(parse_int64(value), key, value);
        if (v < 0) throw ConfigError("seed must be non-negative");
        seed = static_cast<std::uint64_t>(v);
    } else if (key == "timeout") {
        timeout_s = need(parse_double(value), key, value);
    } else if (key == "repeats") {
        repeats = need(parse_int(value), key, value);
    } else if (key == "strategy") {
        strategy = need(measure::parse_strategy(value), key, value);
    } else if (key == "matrices") {
        matrices = parse_list(key, value, [](std::string_view s) { return parse_matrix(s); });
    } else if (key == "blocks") {
        if (value == "canonical") {
            blocks = canonical_blocks();
        } else {
            blocks = parse_list(key, value, [](std::string_view s) { return parse_block(s); });
        }
    } else if (key == "workers") {
        workers = need(parse_int(value), key, value);
    } else if (key == "download_workers") {
        download_workers = need(parse_int(value), key, value);
    } else if (key == "devices") {
        devices = parse_list(key, value, [&](std::string_view s) { return need(parse_int(s), key, s); });
    } else if (key == "max_fix_attempts") {
        max_fix_attempts = need(parse_int(value), key, value);
    } else if (key == "timestamps") {
        timestamps = need(parse_bool(value), key, value);
    } else if (key == "threshold") {
        threshold = need(parse_double(value), key, value);
    } else if (key == "gain") {
        gain = need(parse_double(value), key, value);
    } else if (key == "default_block") {
        try {
            default_block = parse_block(value);
        } catch (const ContractViolation& e) {
            throw ConfigError("invalid value for default_block: " + std::string(e.what()));
        }
    } else {
        throw ConfigError("unknown configuration key '" + std::string(raw_key) + "'");
    }
}

void PipelineConfig::validate() const {
    if (!(timeout_s > 0)) throw ConfigError("timeout must be positive");
    if (repeats < 1) throw ConfigError("repeats must be at least 1");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (download_workers < 1) throw ConfigError("download_workers must be at least 1");
    if (max_fix_attempts < 1) throw ConfigError("max_fix_attempts must be at least 1");
    if (devices.empty()) throw ConfigError("no devices configured");
    if (std::set<int>(devices.begin(), devices.end()).size() != devices.size()) {
        throw ConfigError("device ids must be distinct");
    }
    for (int d : devices) {
        if (d < 0) throw ConfigError("device ids must be non-negative");
    }
    try {
        sweep::SweepSpace{matrices, blocks}.validate();
    } catch (const ContractViolation& e) {
        throw ConfigError(e.what());
    }
    if (std::find(blocks.begin(), blocks.end(), default_block) == blocks.end()) {
        throw ConfigError("default_block " + to_string(default_block) + " is not in the block set");
    }
    if (!(threshold > 0 && threshold <= 1)) throw ConfigError("threshold must lie in (0,1]");
    if (!(gain >= 0)) throw ConfigError("gain must be non-negative");
    if (compiler_template.find("{src}") == std::string::npos || compiler_template.find("{out}") == std::string::npos) {
        throw ConfigError("compiler template needs {src} and {out}");
    }
}

void apply_config_file(PipelineConfig& config, const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    int line_no = 0;
    for (const auto& line : split(read_file(path), '\n')) {
        ++line_no;
        auto text = std::string_view(line);
        if (auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
        text = trim(text);
        if (text.empty()) continue;
        auto eq = text.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
        }
        try {
            config.set(text.substr(0, eq), text.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

namespace {

struct Streams {
    std::ostream& out;
    std::ostream& err;
};

std::unique_ptr<build::Executor> make_executor(const PipelineConfig& c) {
    if (c.backend == build::BackendKind::simulated) {
        build::SimulatedModel model;
        model.seed = c.seed;
        return std::make_unique<build::SimulatedExecutor>(model);
    }
    build::CompilerConfig cc;
    cc.command_template = c.compiler_template;
    cc.compiler = c.compiler;
    cc.max_fix_attempts = c.max_fix_attempts;
    return std::make_unique<build::RealExecutor>(cc);
}

void stage_mine(const PipelineConfig& c, Streams io) {
    if (c.repo_list.empty()) throw ConfigError("mine needs --repo-list");
    corpus::MineOptions opts;
    opts.concurrency = c.download_workers;
    auto refs = corpus::mine(c.repo_list, c.corpus, opts);
    std::map<std::string, int> counts;
    for (const auto& r : refs) ++counts[std::string(corpus::to_string(r.status))];
    io.out << "mined " << refs.size() << " repositories:";
    for (const auto& [k, v] : counts) io.out << ' ' << k << '=' << v;
    io.out << '\n';
}

void stage_extract(const PipelineConfig& c, Streams io) {
    auto records = extract::extract_corpus(c.corpus);
    std::map<std::string, int> counts;
    for (const auto& r : records) ++counts[std::string(extract::to_string(r.status))];
    io.out << "extracted " << records.size() << " candidates:";
    for (const auto& [k, v] : counts) io.out << ' ' << k << '=' << v;
    io.out << '\n';
}

struct BuildRecord {
    std::string id;
    std::string function;
    std::size_t repo_index = 0;
    build::BuildResult result;
};

std::string build_line(const BuildRecord& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["function"] = r.function;
    j["repo_index"] = r.repo_index;
    j["status"] = build::to_string(r.result.status);
    j["attempts"] = r.result.attempts;
    j["diagnostics"] = r.result.diagnostics;
    return j.dump();
}

void stage_build(const PipelineConfig& c, Streams io) {
    auto manifest = c.corpus / extract::kExtractManifest;
    if (!fs::exists(manifest)) throw Error("missing " + manifest.string() + "; run extract first");
    auto candidates = extract::read_manifest(manifest);
    std::vector<BuildRecord> records;
    for (const auto& cand : candidates) {
        if (cand.status != extract::CandidateStatus::ok) continue;
        records.push_back({cand.id, cand.function, cand.repo_index, {}});
    }
    auto executor = make_executor(c);
    auto reference = make_launch(c.blocks.front(), c.matrices.front());

    std::atomic<std::size_t> next{0};
    std::mutex failure_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        try {
            for (std::size_t i = next++; i < records.size(); i = next++) {
                auto& rec = records[i];
                build::UnitHandle unit{rec.id, c.corpus / extract::kUnitsDir / rec.id,
                                       c.corpus / std::to_string(rec.repo_index), true};
                try {
                    auto sig = extract::load_unit_signature(unit.folder);
                    write_file(unit.folder / "main.cu", harness::generate_main(sig, reference));
                } catch (const harness::HarnessError& e) {
                    rec.result.unit_id = rec.id;
                    rec.result.status = build::BuildStatus::compile_error;
                    rec.result.diagnostics.push_back(std::string("harness: ") + e.what());
                    continue;
                }
                rec.result = executor->compile(unit);
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = records.size();
        }
    };
    {
        std::vector<std::jthread> pool;
        for (int w = 0; w < c.workers; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    std::string text;
    std::map<std::string, int> counts;
    for (const auto& r : records) {
        text += build_line(r) + "\n";
        ++counts[std::string(build::to_string(r.result.status))];
    }
    write_file(c.corpus / kBuildManifest, text);
    io.out << "built " << records.size() << " units:";
    for (const auto& [k, v] : counts) io.out << ' ' << k << '=' << v;
    io.out << '\n';
}

std::vector<sweep::SweepUnit> runnable_units(const PipelineConfig& c) {
    auto manifest = c.corpus / kBuildManifest;
    if (!fs::exists(manifest)) throw Error("missing " + manifest.string() + "; run build first");
    std::vector<sweep::SweepUnit> units;
    int line_no = 0;
    for (const auto& line : split(read_file(manifest), '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            auto status = build::parse_build_status(j.at("status").get<std::string>());
            if (!status) throw Error("bad status");
            if (*status == build::BuildStatus::compile_error) continue;
            sweep::SweepUnit u;
            u.handle.id = j.at("id").get<std::string>();
            u.function_name = j.at("function").get<std::string>();
            u.repo_index = j.at("repo_index").get<std::size_t>();
            u.handle.folder = c.corpus / extract::kUnitsDir / u.handle.id;
            u.handle.repo_dir = c.corpus / std::to_string(u.repo_index);
            units.push_back(std::move(u));
        } catch (const std::exception& e) {
            throw Error(manifest.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return units;
}

void stage_sweep(const PipelineConfig& c, Streams io, bool fresh) {
    auto units = runnable_units(c);
    auto executor = make_executor(c);
    sweep::SweepOptions opts;
    opts.timeout_s = c.timeout_s;
    opts.repeats = c.repeats;
    opts.strategy = c.strategy;
    opts.devices = c.devices;
    opts.timestamps = c.timestamps;
    opts.jsonl = c.corpus / kDatasetJsonl;
    opts.csv = c.corpus / kDatasetCsv;
    if (fresh) fs::remove(opts.jsonl);
    auto result = sweep::run_sweep(units, sweep::SweepSpace{c.matrices, c.blocks}, *executor, opts);
    auto stats = dataset_stats(result.rows);
    io.out << "swept " << units.size() << " units: " << result.executed << " points run, " << result.skipped
           << " already present, " << stats.rows << " rows, non-NaN fraction " << format_double(stats.non_nan_fraction)
           << '\n';
}

analysis::AnalysisOptions analysis_options(const PipelineConfig& c) {
    analysis::AnalysisOptions o;
    o.blocks = c.blocks;
    o.default_block = c.default_block;
    o.threshold = c.threshold;
    o.gain = c.gain;
    return o;
}

void stage_analyze(const PipelineConfig& c, Streams io, const fs::path& csv, const fs::path& out_dir) {
    auto rows = read_csv(csv);
    auto opts = analysis_options(c);
    auto report = analysis::analyze(rows, opts);
    fs::path dir = out_dir.empty() ? (csv.has_parent_path() ? csv.parent_path() : fs::path(".")) : out_dir;
    analysis::write_outputs(report, opts, dir);
    io.out << "analyzed " << report.n_slices << " slices (" << report.n_complete << " complete, "
           << report.n_incomplete << " incomplete); wrote " << (dir / "report.json").string() << '\n';
}

using Overrides = std::vector<std::pair<std::string, std::string>>;

void add_common(CLI::App* sub, Overrides& ov, std::string& config_file) {
    sub->add_option("--config", config_file, "key = value configuration file");
    auto opt = [&](const std::string& flag, const std::string& key, const std::string& help) {
        sub->add_option_function<std::string>(
            flag, [&ov, key](const std::string& v) { ov.emplace_back(key, v); }, help);
    };
    opt("--corpus", "corpus", "corpus root directory");
    opt("--repo-list", "repo_list", "repository URL list, one per line");
    opt("--seed", "seed", "simulated backend seed");
    opt("--backend", "backend", "real or simulated");
    opt("--timeout", "timeout", "per-execution timeout in seconds");
    opt("--workers", "workers", "parallel compilation workers");
    opt("--download-workers", "download_workers", "parallel repository downloads");
    opt("--devices", "devices", "comma-separated device ids");
    opt("--repeats", "repeats", "executions per sweep point");
    opt("--strategy", "strategy", "mean, median, min, max or trimmed_mean_20");
    opt("--matrices", "matrices", "comma-separated WxH sizes");
    opt("--blocks", "blocks", "comma-separated XxYxZ blocks or 'canonical'");
    opt("--compiler", "compiler", "compiler executable");
    opt("--compiler-template", "compiler_template", "command with {compiler} {src} {out} {include_dir}");
    opt("--max-fix-attempts", "max_fix_attempts", "compile attempts per unit");
    opt("--threshold", "threshold", "performance threshold for the below-threshold fraction");
    opt("--gain", "gain", "gain threshold for the above-threshold fraction");
    opt("--default-block", "default_block", "default block for gain statistics");
    sub->add_flag_callback("--no-timestamps", [&ov] { ov.emplace_back("timestamps", "false"); },
                           "leave the timestamp column empty");
}

PipelineConfig resolve(const std::string& config_file, const Overrides& ov) {
    PipelineConfig c;
    if (!config_file.empty()) apply_config_file(c, config_file);
    for (const auto& [k, v] : ov) c.set(k, v);
    c.validate();
    return c;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Thread-block sweep pipeline for CUDA kernels", "blocktune"};
    app.require_subcommand(1);
    app.fallthrough(false);

    Overrides ov;
    std::string config_file;
    fs::path positional;
    fs::path out_dir;
    std::size_t k = 10;
    std::size_t reps = 10000;

    struct Sub {
        std::string name;
        std::string help;
    };
    const std::vector<Sub> subs = {
        {"mine", "download and filter repositories"},
        {"extract", "isolate kernels from the mined corpus"},
        {"build", "synthesize harnesses and compile units"},
        {"sweep", "run every unit over the matrix x block space"},
        {"aggregate-eval", "compare aggregation strategies on a sample file"},
        {"analyze", "derive best-block statistics from a dataset CSV"},
        {"report", "summarize a dataset CSV"},
        {"all", "extract, build, sweep and analyze (mine first when a repo list is set)"},
    };
    std::map<std::string, CLI::App*> apps;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        add_common(sub, ov, config_file);
        apps[s.name] = sub;
    }
    apps["aggregate-eval"]->add_option("samples", positional, "one runtime per line")->required();
    apps["aggregate-eval"]->add_option("--k", k, "samples per repetition");
    apps["aggregate-eval"]->add_option("--reps", reps, "repetitions");
    apps["analyze"]->add_option("dataset", positional, "dataset CSV")->required();
    apps["analyze"]->add_option("--out", out_dir, "output directory (defaults to the dataset's)");
    apps["report"]->add_option("dataset", positional, "dataset CSV (defaults to <corpus>/dataset.csv)");
    apps["sweep"]->add_flag_callback("--fresh", [&] { ov.emplace_back("__fresh", "1"); },
                                     "discard previously streamed rows");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    bool fresh = false;
    std::erase_if(ov, [&](const auto& kv) {
        if (kv.first != "__fresh") return false;
        fresh = true;
        return true;
    });

    Streams io{out, err};
    try {
        auto config = resolve(config_file, ov);
        std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "mine") {
            stage_mine(config, io);
        } else if (cmd == "extract") {
            stage_extract(config, io);
        } else if (cmd == "build") {
            stage_build(config, io);
        } else if (cmd == "sweep") {
            stage_sweep(config, io, fresh);
        } else if (cmd == "aggregate-eval") {
            auto samples = measure::read_samples(positional);
            auto report = measure::evaluate_strategies(samples, k, reps, config.seed);
            out << report.to_json();
        } else if (cmd == "analyze") {
            stage_analyze(config, io, positional, out_dir);
        } else if (cmd == "report") {
            auto csv = positional.empty() ? config.corpus / kDatasetCsv : positional;
            out << dataset_stats(read_csv(csv)).to_json();
        } else if (cmd == "all") {
            if (!config.repo_list.empty()) stage_mine(config, io);
            stage_extract(config, io);
            stage_build(config, io);
            stage_sweep(config, io, true);
            stage_analyze(config, io, config.corpus / kDatasetCsv, config.corpus);
        }
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const ContractViolation& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

int dispatch(int argc, const char* const* argv) { return dispatch(argc, argv, std::cout, std::cerr); }

}  // namespace blocktune::cli
