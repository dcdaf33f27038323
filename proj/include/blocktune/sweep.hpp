#pragma once

#include "blocktune/build_exec.hpp"
#include "blocktune/dataset.hpp"
#include "blocktune/launch.hpp"
#include "blocktune/measurement.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace blocktune::sweep {

struct SweepSpace {
    std::vector<MatrixSize> matrices;
    std::vector<BlockConfig> blocks;

    std::size_t size() const { return matrices.size() * blocks.size(); }
    // Throws ContractViolation on an empty axis, an illegal block or a repeat.
    void validate() const;
};

// The twenty canonical blocks crossed with the given matrices.
SweepSpace canonical_space(const std::vector<MatrixSize>& matrices = default_matrices());

struct SweepUnit {
    build::UnitHandle handle;
    std::string function_name;
    std::size_t repo_index = 0;
};

struct SweepOptions {
    double timeout_s = 30.0;
    int repeats = 10;
    measure::Strategy strategy = measure::Strategy::median;
    std::vector<int> devices{0};  // one worker per id
    bool timestamps = true;
    std::filesystem::path jsonl;  // streamed rows; existing keys are skipped
    std::filesystem::path csv;    // compacted output, skipped when empty
    std::filesystem::path execution_log;  // "<device> <start_ns> <end_ns>" per execution, optional
};

struct SweepResult {
    std::vector<DatasetRow> rows;  // whole dataset after the run, in compaction order
    std::size_t executed = 0;      // points run in this call
    std::size_t skipped = 0;       // points already present
};

/// Runs every (unit, matrix, block) point not yet in the JSONL file. Each
/// point executes `repeats` times; ok runtimes are aggregated with the chosen
/// strategy, and a timeout ends the point early as a timeout row.
SweepResult run_sweep(const std::vector<SweepUnit>& units, const SweepSpace& space, build::Executor& executor,
                      const SweepOptions& options);

// Deduplicated by key (first occurrence wins) and ordered by unit id, then
// the space's matrix order, then its block order.
std::vector<DatasetRow> compact(std::vector<DatasetRow> rows, const SweepSpace& space);

}  // namespace blocktune::sweep
