#include "blocktune/build_exec.hpp"

#include "blocktune/error.hpp"
#include "blocktune/harness_synth.hpp"
#include "blocktune/kernel_extractor.hpp"
#include "blocktune/lexer.hpp"
#include "blocktune/process.hpp"
#include "blocktune/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <regex>
#include <set>

namespace fs = std::filesystem;

namespace blocktune::build {

std::string_view to_string(BuildStatus s) {
    switch (s) {
        case BuildStatus::ok: return "ok";
        case BuildStatus::compile_error: return "compile_error";
        case BuildStatus::fixed_then_ok: return "fixed_then_ok";
    }
    return "compile_error";
}

std::string_view to_string(RunStatus s) {
    switch (s) {
        case RunStatus::ok: return "ok";
        case RunStatus::timeout: return "timeout";
        case RunStatus::runtime_error: return "runtime_error";
        case RunStatus::parse_error: return "parse_error";
    }
    return "parse_error";
}

std::string_view to_string(BackendKind k) { return k == BackendKind::real ? "real" : "simulated"; }

std::optional<BuildStatus> parse_build_status(std::string_view s) {
    for (auto v : {BuildStatus::ok, BuildStatus::compile_error, BuildStatus::fixed_then_ok}) {
        if (to_string(v) == s) return v;
    }
    return std::nullopt;
}

std::optional<RunStatus> parse_run_status(std::string_view s) {
    for (auto v : {RunStatus::ok, RunStatus::timeout, RunStatus::runtime_error, RunStatus::parse_error}) {
        if (to_string(v) == s) return v;
    }
    return std::nullopt;
}

std::optional<BackendKind> parse_backend(std::string_view s) {
    if (s == "real") return BackendKind::real;
    if (s == "simulated") return BackendKind::simulated;
    return std::nullopt;
}

namespace {

constexpr std::string_view kMarker = "// isolated kernel\n";

std::vector<std::string> captures(std::string_view text, const std::vector<std::regex>& patterns) {
    std::vector<std::string> out;
    std::string s(text);
    for (const auto& re : patterns) {
        for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
            std::string m = (*it)[1].str();
            if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
        }
    }
    return out;
}

const std::vector<std::regex>& missing_file_patterns() {
    static const std::vector<std::regex> p = {
        std::regex(R"(([^\s:"'<>]+): No such file)"),
        std::regex(R"re(cannot open source file "([^"]+)")re"),
        std::regex(R"('([^']+)' file not found)"),
    };
    return p;
}

const std::vector<std::regex>& undeclared_patterns() {
    static const std::vector<std::regex> p = {
        std::regex(R"([Uu]ndefined reference to [`'"]?([A-Za-z_]\w*))"),
        std::regex(R"re(identifier "([A-Za-z_]\w*)" is undefined)re"),
        std::regex(R"('([A-Za-z_]\w*)' was not declared in this scope)"),
        std::regex(R"(use of undeclared identifier '([A-Za-z_]\w*)')"),
        std::regex(R"('([A-Za-z_]\w*)' undeclared)"),
        std::regex(R"re(undefined identifier "?'?([A-Za-z_]\w*))re"),
    };
    return p;
}

const std::vector<std::regex>& duplicate_main_patterns() {
    static const std::vector<std::regex> p = {
        std::regex(R"(multiple definition of [`'"]?(main)\b)"),
        std::regex(R"(redefinition of '(?:int )?(main)\b)"),
        std::regex(R"re(function "(main)" has already been defined)re"),
    };
    return p;
}

bool inside(const fs::path& root, const fs::path& p) {
    auto rel = p.lexically_normal().lexically_relative(root.lexically_normal());
    return !rel.empty() && *rel.begin() != "..";
}

std::optional<std::string> fix_missing_include(const FixContext& ctx, std::string_view diags) {
    if (ctx.repo_dir.empty() || !fs::is_directory(ctx.repo_dir)) return std::nullopt;
    for (const auto& target : captures(diags, missing_file_patterns())) {
        fs::path want(target);
        auto base = want.filename();
        if (base.empty()) continue;
        std::vector<fs::path> hits;
        for (const auto& e : fs::recursive_directory_iterator(ctx.repo_dir)) {
            if (e.is_regular_file() && e.path().filename() == base) hits.push_back(e.path());
        }
        if (hits.empty()) continue;
        std::sort(hits.begin(), hits.end());
        fs::path src = hits.front();
        for (const auto& h : hits) {
            auto tail = want.lexically_normal().generic_string();
            auto full = h.generic_string();
            if (full.size() >= tail.size() && full.compare(full.size() - tail.size(), tail.size(), tail) == 0) {
                src = h;
                break;
            }
        }
        fs::path dest = ctx.unit_folder / want;
        if (!inside(ctx.unit_folder, dest)) dest = ctx.unit_folder / base;
        if (fs::exists(dest)) continue;
        fs::create_directories(dest.parent_path());
        fs::copy_file(src, dest);
        return "copied " + fs::relative(src, ctx.repo_dir).generic_string() + " to " +
               fs::relative(dest, ctx.unit_folder).generic_string();
    }
    return std::nullopt;
}

bool defines_function(std::string_view content, std::string_view name) {
    auto scan = extract::scan_functions(content, {});
    return std::any_of(scan.functions.begin(), scan.functions.end(),
                       [&](const auto& f) { return f.name == name; });
}

std::optional<std::string> fix_undefined_device_function(const FixContext& ctx, std::string_view diags) {
    auto names = captures(diags, undeclared_patterns());
    if (names.empty() || ctx.repo_dir.empty() || !fs::is_directory(ctx.repo_dir)) return std::nullopt;
    auto kernel_path = ctx.unit_folder / "kernel.cu";
    if (!fs::exists(kernel_path)) return std::nullopt;
    auto repo = extract::Repo::load(ctx.repo_dir, 0);
    std::string kernel = read_file(kernel_path);
    for (const auto& name : names) {
        auto defs = repo.device_definitions(name);
        if (defs.empty() || defines_function(kernel, name)) continue;
        const auto* def = defs.front();
        const auto& text = repo.content(def->source_file.relative_path);
        std::string block = text.substr(def->decl_span.begin, def->decl_span.end - def->decl_span.begin) + "\n\n";
        auto at = kernel.find(kMarker);
        if (at == std::string::npos) {
            kernel += "\n" + block;
        } else {
            kernel.insert(at, block);
        }
        write_file(kernel_path, kernel);
        return "inserted device function " + name + " from " + def->source_file.relative_path;
    }
    return std::nullopt;
}

// Byte range of a namespace-scope definition of main, if any.
std::optional<std::pair<std::size_t, std::size_t>> find_main(std::string_view content) {
    auto lexed = lex::tokenize(content);
    const auto& t = lexed.tokens;
    std::size_t stmt_begin = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i].kind == lex::TokenKind::directive || t[i].is(';')) {
            stmt_begin = t[i].end;
            continue;
        }
        if (t[i].is('{')) {
            auto close = lex::match_bracket(t, i);
            if (close == lex::npos) return std::nullopt;
            i = close;
            stmt_begin = t[i].end;
            continue;
        }
        if (t[i].is_ident("main") && i + 1 < t.size() && t[i + 1].is('(')) {
            auto rp = lex::match_bracket(t, i + 1);
            if (rp == lex::npos || rp + 1 >= t.size() || !t[rp + 1].is('{')) continue;
            auto close = lex::match_bracket(t, rp + 1);
            if (close == lex::npos) return std::nullopt;
            return std::make_pair(stmt_begin, t[close].end);
        }
    }
    return std::nullopt;
}

bool is_harness_file(const fs::path& p) {
    auto name = p.filename().string();
    return name == "main.cu" || name.rfind("launch_", 0) == 0;
}

std::optional<std::string> fix_duplicate_main(const FixContext& ctx, std::string_view diags) {
    if (captures(diags, duplicate_main_patterns()).empty()) return std::nullopt;
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(ctx.unit_folder)) {
        if (!e.is_regular_file() || is_harness_file(e.path())) continue;
        if (corpus::classify(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<std::string> stripped;
    for (const auto& f : files) {
        std::string content = read_file(f);
        auto range = find_main(content);
        if (!range) continue;
        content.replace(range->first, range->second - range->first, "\n");
        write_file(f, content);
        stripped.push_back(fs::relative(f, ctx.unit_folder).generic_string());
    }
    if (stripped.empty()) return std::nullopt;
    std::string desc = "removed main from";
    for (const auto& s : stripped) desc += " " + s;
    return desc;
}

const std::map<std::string, std::string, std::less<>>& standard_headers() {
    static const std::map<std::string, std::string, std::less<>> m = [] {
        std::map<std::string, std::string, std::less<>> out;
        for (auto n : {"printf", "fprintf", "sprintf", "snprintf", "puts", "FILE", "fopen", "fclose", "stderr"})
            out[n] = "cstdio";
        for (auto n : {"malloc", "calloc", "free", "exit", "abs", "rand", "srand", "atoi", "atof"})
            out[n] = "cstdlib";
        for (auto n : {"memcpy", "memset", "strlen", "strcmp", "strcpy", "memmove"}) out[n] = "cstring";
        for (auto n : {"sqrt", "sqrtf", "exp", "expf", "pow", "powf", "fabs", "fabsf", "floor", "floorf",
                       "ceil", "ceilf", "log", "logf", "sin", "sinf", "cos", "cosf", "tanh", "tanhf", "fmax",
                       "fmin", "fmaxf", "fminf"})
            out[n] = "cmath";
        out["assert"] = "cassert";
        for (auto n : {"FLT_MAX", "FLT_MIN", "DBL_MAX", "DBL_MIN"}) out[n] = "cfloat";
        for (auto n : {"INT_MAX", "INT_MIN", "UINT_MAX"}) out[n] = "climits";
        for (auto n : {"uint8_t", "uint32_t", "uint64_t", "int32_t", "int64_t"}) out[n] = "cstdint";
        return out;
    }();
    return m;
}

std::optional<std::string> fix_standard_header(const FixContext& ctx, std::string_view diags) {
    auto kernel_path = ctx.unit_folder / "kernel.cu";
    if (!fs::exists(kernel_path)) return std::nullopt;
    std::string kernel = read_file(kernel_path);
    for (const auto& name : captures(diags, undeclared_patterns())) {
        auto it = standard_headers().find(name);
        if (it == standard_headers().end()) continue;
        std::string line = "#include <" + it->second + ">\n";
        if (kernel.find(line) != std::string::npos) continue;
        write_file(kernel_path, line + kernel);
        return "added <" + it->second + "> for " + name;
    }
    return std::nullopt;
}

}  // namespace

const std::vector<FixRule>& standard_fix_rules() {
    static const std::vector<FixRule> rules = {
        {"missing_include", fix_missing_include},
        {"undefined_device_function", fix_undefined_device_function},
        {"duplicate_main", fix_duplicate_main},
        {"standard_header", fix_standard_header},
    };
    return rules;
}

FixOutcome apply_fix_rules(const FixContext& ctx, std::string_view diagnostics, const std::vector<FixRule>& rules) {
    for (const auto& rule : rules) {
        if (auto desc = rule.apply(ctx, diagnostics)) return {true, rule.name, *desc};
    }
    return {};
}

// ---------------------------------------------------------------------------

namespace {

double unit_uniform(std::uint64_t h) { return static_cast<double>(mix64(h) >> 11) * 0x1.0p-53; }

std::uint64_t unit_hash(const SimulatedModel& model, std::string_view unit_id) {
    return mix64(model.seed ^ fnv1a(unit_id));
}

}  // namespace

const std::vector<BlockConfig>& planting_pool(const SimulatedModel& model) {
    return model.blocks.empty() ? canonical_blocks() : model.blocks;
}

BlockConfig planted_block(const SimulatedModel& model, std::string_view unit_id) {
    const auto& pool = planting_pool(model);
    return pool[unit_hash(model, unit_id) % pool.size()];
}

double block_penalty(const SimulatedModel& model, std::string_view unit_id, const BlockConfig& block) {
    auto h = unit_hash(model, unit_id);
    auto best = planted_block(model, unit_id);
    double a = model.curvature_min + (model.curvature_max - model.curvature_min) * unit_uniform(h ^ 0xa5a5a5a5ULL);
    double d = static_cast<double>(block.threads() - best.threads()) / kMaxThreadsPerBlock;
    double p = 1.0 + a * d * d;
    if (block.is_1d() != best.is_1d()) p += model.shape_penalty;
    else if (block != best && block.threads() == best.threads()) p += model.shape_penalty;
    return p;
}

double simulated_runtime(const SimulatedModel& model, std::string_view unit_id, const LaunchConfig& launch) {
    if (!launch.block.valid()) throw ContractViolation("illegal block " + to_string(launch.block));
    auto h = unit_hash(model, unit_id);
    double base = 1e-5 * (0.2 + 1.8 * unit_uniform(h ^ 0x5bd1e995ULL));
    std::uint64_t lh = h;
    for (long long v : {static_cast<long long>(launch.matrix.width), static_cast<long long>(launch.matrix.height),
                        static_cast<long long>(launch.block.x), static_cast<long long>(launch.block.y),
                        static_cast<long long>(launch.block.z)}) {
        lh = mix64(lh ^ static_cast<std::uint64_t>(v));
    }
    double eps = model.noise * (2.0 * unit_uniform(lh) - 1.0);
    return base * static_cast<double>(launch.matrix.elements()) * block_penalty(model, unit_id, launch.block) *
           (1.0 + eps);
}

// ---------------------------------------------------------------------------

std::string resolved_compiler(const CompilerConfig& config) {
    if (!config.compiler.empty()) return config.compiler;
    if (const char* env = std::getenv("BLOCKTUNE_COMPILER"); env && *env) return env;
    return "nvcc";
}

std::string expand_command(const CompilerConfig& config, const fs::path& src, const fs::path& out,
                           const fs::path& include_dir) {
    const std::map<std::string, std::string> values = {
        {"{compiler}", resolved_compiler(config)},
        {"{src}", src.string()},
        {"{out}", out.string()},
        {"{include_dir}", include_dir.string()},
    };
    std::string result;
    const auto& t = config.command_template;
    for (std::size_t i = 0; i < t.size();) {
        bool replaced = false;
        if (t[i] == '{') {
            for (const auto& [key, value] : values) {
                if (t.compare(i, key.size(), key) == 0) {
                    result += value;
                    i += key.size();
                    replaced = true;
                    break;
                }
            }
        }
        if (!replaced) result += t[i++];
    }
    return result;
}

RunOutcome classify_run(std::string_view stdout_text, int exit_code, int term_signal, bool timed_out) {
    RunOutcome r;
    if (timed_out) {
        r.status = RunStatus::timeout;
        r.diagnostic = "killed at timeout";
        return r;
    }
    if (stdout_text.find("KERNEL_ERROR") != std::string_view::npos) {
        r.status = RunStatus::runtime_error;
        r.diagnostic = "kernel reported an error";
        return r;
    }
    if (term_signal != 0 || exit_code != 0) {
        r.status = RunStatus::runtime_error;
        r.diagnostic = term_signal != 0 ? "terminated by signal " + std::to_string(term_signal)
                                        : "exit code " + std::to_string(exit_code);
        return r;
    }
    constexpr std::string_view key = "RUNTIME_MS:";
    for (const auto& line : split(stdout_text, '\n')) {
        auto l = trim(line);
        if (l.substr(0, key.size()) != key) continue;
        auto v = parse_double(trim(l.substr(key.size())));
        if (v && std::isfinite(*v) && *v > 0) {
            r.status = RunStatus::ok;
            r.runtime_ms = *v;
            return r;
        }
        break;
    }
    r.status = RunStatus::parse_error;
    r.diagnostic = "no RUNTIME_MS line on stdout";
    return r;
}

RunOutcome execute(const std::vector<std::string>& command, const LaunchConfig& launch, double timeout_s,
                   const std::vector<std::pair<std::string, std::string>>& env) {
    if (!(timeout_s > 0)) throw ContractViolation("timeout must be positive");
    ProcessOptions opts;
    opts.timeout_s = timeout_s;
    opts.env = env;
    auto res = run_process(command, opts);
    RunOutcome r;
    if (res.spawn_failed) {
        r.status = RunStatus::runtime_error;
        r.diagnostic = "spawn failed: " + res.error;
    } else {
        r = classify_run(res.out, res.exit_code, res.term_signal, res.timed_out);
        if (!res.err.empty()) {
            if (!r.diagnostic.empty()) r.diagnostic += "; ";
            r.diagnostic += std::string(trim(res.err.substr(0, 2000)));
        }
    }
    r.launch = launch;
    r.wall_time_s = res.wall_s;
    return r;
}

std::string launch_key(const LaunchConfig& launch) {
    return "m" + to_string(launch.matrix) + "_b" + to_string(launch.block);
}

// ---------------------------------------------------------------------------

BuildResult SimulatedExecutor::compile(const UnitHandle& unit) {
    BuildResult r;
    r.unit_id = unit.id;
    r.attempts = 1;
    if (unit.buildable) {
        r.status = BuildStatus::ok;
    } else {
        r.status = BuildStatus::compile_error;
        r.diagnostics.push_back("unit marked non-buildable");
    }
    return r;
}

RunOutcome SimulatedExecutor::run(const UnitHandle& unit, const LaunchConfig& launch, double timeout_s, int) {
    if (!(timeout_s > 0)) throw ContractViolation("timeout must be positive");
    RunOutcome r;
    r.unit_id = unit.id;
    r.launch = launch;
    r.status = RunStatus::ok;
    r.runtime_ms = simulated_runtime(model_, unit.id, launch);
    return r;
}

RealExecutor::RealExecutor(CompilerConfig config) : config_(std::move(config)) {
    if (config_.max_fix_attempts < 1) throw ConfigError("max_fix_attempts must be at least 1");
}

namespace {

void require_compiler(const std::string& command) {
    auto words = split(trim(command), ' ');
    std::string first = words.empty() ? std::string() : words.front();
    if (first.empty() || find_executable(first).empty()) {
        throw ConfigError("compiler not found: '" + first + "'");
    }
}

std::string combined(const ProcessResult& res) {
    std::string s = res.out;
    if (!s.empty() && !res.err.empty() && s.back() != '\n') s += '\n';
    s += res.err;
    if (res.timed_out) s += "\ncompiler timed out";
    if (res.spawn_failed) s += "\n" + res.error;
    return s;
}

bool compiled(const ProcessResult& res) {
    return !res.spawn_failed && !res.timed_out && res.term_signal == 0 && res.exit_code == 0;
}

}  // namespace

BuildResult RealExecutor::compile(const UnitHandle& unit) {
    BuildResult r;
    r.unit_id = unit.id;
    auto src = unit.folder / "main.cu";
    auto out = unit.folder / "bench";
    auto command = expand_command(config_, src, out, unit.folder);
    require_compiler(command);
    if (!fs::exists(src)) throw ContractViolation("no harness in " + unit.folder.string());

    auto log_path = unit.folder / "build.log";
    auto log = [&](const std::string& line) {
        std::lock_guard lock(log_mutex_);
        append_file(log_path, line + "\n");
    };
    FixContext ctx{unit.folder, unit.repo_dir};
    ProcessOptions opts;
    opts.timeout_s = config_.compile_timeout_s;
    opts.cwd = unit.folder;

    for (int attempt = 1; attempt <= config_.max_fix_attempts; ++attempt) {
        r.attempts = attempt;
        log("attempt " + std::to_string(attempt) + ": " + command);
        auto res = run_shell(command, opts);
        if (compiled(res)) {
            r.status = attempt == 1 ? BuildStatus::ok : BuildStatus::fixed_then_ok;
            log("status " + std::string(to_string(r.status)));
            return r;
        }
        auto diags = combined(res);
        r.diagnostics.push_back(diags);
        log(diags);
        if (attempt == config_.max_fix_attempts) break;
        auto fix = apply_fix_rules(ctx, diags);
        if (!fix.changed) {
            log("no fix rule applies");
            break;
        }
        log("fix " + fix.rule + ": " + fix.description);
    }
    r.status = BuildStatus::compile_error;
    log("status compile_error");
    return r;
}

RunOutcome RealExecutor::run(const UnitHandle& unit, const LaunchConfig& launch, double timeout_s, int device_id) {
    auto key = launch_key(launch);
    auto src = unit.folder / ("launch_" + key + ".cu");
    auto bin = unit.folder / "bin" / key;
    RunOutcome failed;
    failed.unit_id = unit.id;
    failed.launch = launch;
    failed.status = RunStatus::runtime_error;

    if (!fs::exists(bin)) {
        try {
            write_file(src, harness::generate_main(extract::load_unit_signature(unit.folder), launch));
        } catch (const harness::HarnessError& e) {
            failed.diagnostic = e.what();
            return failed;
        }
        fs::create_directories(bin.parent_path());
        auto command = expand_command(config_, src, bin, unit.folder);
        require_compiler(command);
        ProcessOptions opts;
        opts.timeout_s = config_.compile_timeout_s;
        opts.cwd = unit.folder;
        auto res = run_shell(command, opts);
        if (!compiled(res) || !fs::exists(bin)) {
            std::lock_guard lock(log_mutex_);
            append_file(unit.folder / "build.log", "launch " + key + " failed:\n" + combined(res) + "\n");
            failed.diagnostic = "launch harness failed to compile";
            return failed;
        }
    }
    auto r = execute({fs::absolute(bin).string()}, launch, timeout_s,
                     {{"CUDA_VISIBLE_DEVICES", std::to_string(device_id)}});
    r.unit_id = unit.id;
    return r;
}

}  // namespace blocktune::build
