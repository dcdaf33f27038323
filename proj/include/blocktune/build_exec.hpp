#pragma once

#include "blocktune/launch.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blocktune::build {

enum class BuildStatus { ok, compile_error, fixed_then_ok };
enum class RunStatus { ok, timeout, runtime_error, parse_error };
enum class BackendKind { real, simulated };

std::string_view to_string(BuildStatus s);
std::string_view to_string(RunStatus s);
std::string_view to_string(BackendKind k);
std::optional<BuildStatus> parse_build_status(std::string_view s);
std::optional<RunStatus> parse_run_status(std::string_view s);
std::optional<BackendKind> parse_backend(std::string_view s);

struct BuildResult {
    std::string unit_id;
    BuildStatus status = BuildStatus::compile_error;
    int attempts = 1;
    std::vector<std::string> diagnostics;

    bool succeeded() const { return status != BuildStatus::compile_error; }
};

struct RunOutcome {
    std::string unit_id;
    LaunchConfig launch;
    RunStatus status = RunStatus::parse_error;
    double runtime_ms = std::numeric_limits<double>::quiet_NaN();
    double wall_time_s = 0.0;
    std::string diagnostic;
};

/// What a backend needs to know about an isolated unit.
struct UnitHandle {
    std::string id;
    std::filesystem::path folder;
    std::filesystem::path repo_dir;  // origin repository, searched by the fix rules
    bool buildable = true;
};

// ---------------------------------------------------------------------------
// Fix rules
// ---------------------------------------------------------------------------

struct FixContext {
    std::filesystem::path unit_folder;
    std::filesystem::path repo_dir;
};

/// One repair. `apply` returns a description when it changed the unit and
/// nullopt when it does not match the diagnostics or cannot help.
struct FixRule {
    std::string name;
    std::function<std::optional<std::string>(const FixContext&, std::string_view diagnostics)> apply;
};

// Ordered catalog: missing quoted include, undefined device function,
// duplicate main, missing standard header.
const std::vector<FixRule>& standard_fix_rules();

struct FixOutcome {
    bool changed = false;
    std::string rule;
    std::string description;
};

FixOutcome apply_fix_rules(const FixContext& ctx, std::string_view diagnostics,
                           const std::vector<FixRule>& rules = standard_fix_rules());

// ---------------------------------------------------------------------------
// Simulated latency model
// ---------------------------------------------------------------------------

struct SimulatedModel {
    std::uint64_t seed = 0;
    double noise = 0.005;           // |epsilon| bound
    double curvature_min = 4.0;     // penalty = 1 + a * ((t - t*) / 1024)^2
    double curvature_max = 10.0;
    double shape_penalty = 0.05;    // added when 1D/2D shape differs from the planted block
    std::vector<BlockConfig> blocks;  // planting pool; empty means the canonical 20
};

const std::vector<BlockConfig>& planting_pool(const SimulatedModel& model);
BlockConfig planted_block(const SimulatedModel& model, std::string_view unit_id);
// Noise-free multiplicative block penalty; exactly 1 at the planted block.
double block_penalty(const SimulatedModel& model, std::string_view unit_id, const BlockConfig& block);
// base(unit) * elements * penalty(block) * (1 + epsilon), in milliseconds.
double simulated_runtime(const SimulatedModel& model, std::string_view unit_id, const LaunchConfig& launch);

// ---------------------------------------------------------------------------
// Compilation and execution
// ---------------------------------------------------------------------------

struct CompilerConfig {
    // Placeholders: {compiler} {src} {out} {include_dir}
    std::string command_template = "{compiler} -O3 -I{include_dir} -o {out} {src}";
    std::string compiler;  // empty: $BLOCKTUNE_COMPILER, then "nvcc"
    int max_fix_attempts = 3;
    double compile_timeout_s = 600.0;
};

std::string resolved_compiler(const CompilerConfig& config);
std::string expand_command(const CompilerConfig& config, const std::filesystem::path& src,
                           const std::filesystem::path& out, const std::filesystem::path& include_dir);

// Maps raw process results onto the RunOutcome contract.
RunOutcome classify_run(std::string_view stdout_text, int exit_code, int term_signal, bool timed_out);

// Runs a built binary (or any command) under a hard timeout.
RunOutcome execute(const std::vector<std::string>& command, const LaunchConfig& launch, double timeout_s,
                   const std::vector<std::pair<std::string, std::string>>& env = {});

class Executor {
public:
    virtual ~Executor() = default;
    virtual BackendKind kind() const = 0;
    // Expects main.cu in the unit folder.
    virtual BuildResult compile(const UnitHandle& unit) = 0;
    virtual RunOutcome run(const UnitHandle& unit, const LaunchConfig& launch, double timeout_s,
                           int device_id) = 0;
};

class SimulatedExecutor final : public Executor {
public:
    explicit SimulatedExecutor(SimulatedModel model) : model_(std::move(model)) {}
    BackendKind kind() const override { return BackendKind::simulated; }
    BuildResult compile(const UnitHandle& unit) override;
    RunOutcome run(const UnitHandle& unit, const LaunchConfig& launch, double timeout_s, int device_id) override;
    const SimulatedModel& model() const { return model_; }

private:
    SimulatedModel model_;
};

/// Invokes the external compiler with the fix loop, then runs binaries with
/// CUDA_VISIBLE_DEVICES pinned to the worker's device.
class RealExecutor final : public Executor {
public:
    explicit RealExecutor(CompilerConfig config);
    BackendKind kind() const override { return BackendKind::real; }
    BuildResult compile(const UnitHandle& unit) override;
    RunOutcome run(const UnitHandle& unit, const LaunchConfig& launch, double timeout_s, int device_id) override;

private:
    CompilerConfig config_;
    std::mutex log_mutex_;
};

// Harness file and binary names for one launch point inside a unit folder.
std::string launch_key(const LaunchConfig& launch);

}  // namespace blocktune::build
