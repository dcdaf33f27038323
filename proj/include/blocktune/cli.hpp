#pragma once

#include "blocktune/build_exec.hpp"
#include "blocktune/launch.hpp"
#include "blocktune/measurement.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace blocktune::cli {

/// Settings shared by every stage. Sources apply in order defaults, config
/// file, flags; each later source overrides the earlier ones key by key.
struct PipelineConfig {
    std::filesystem::path corpus = ".";
    std::filesystem::path repo_list;
    std::string compiler_template = build::CompilerConfig{}.command_template;
    std::string compiler;
    build::BackendKind backend = build::BackendKind::real;
    std::uint64_t seed = 0;
    double timeout_s = 30.0;
    int repeats = 10;
    measure::Strategy strategy = measure::Strategy::median;
    std::vector<MatrixSize> matrices = default_matrices();
    std::vector<BlockConfig> blocks = canonical_blocks();
    int workers = 4;
    int download_workers = 8;
    std::vector<int> devices{0};
    int max_fix_attempts = 3;
    bool timestamps = true;
    double threshold = 0.85;
    double gain = 0.20;
    BlockConfig default_block{1024, 1, 1};

    // Throws ConfigError for unknown keys and unparseable values. Keys may
    // use '-' or '_'.
    void set(std::string_view key, std::string_view value);
    // Throws ConfigError when settings are inconsistent.
    void validate() const;
};

const std::vector<std::string>& config_keys();

// "key = value" lines; '#' starts a comment.
void apply_config_file(PipelineConfig& config, const std::filesystem::path& path);

// Exit codes: 0 success, 1 stage failure, 2 configuration or usage error.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace blocktune::cli
