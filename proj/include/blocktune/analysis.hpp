#pragma once

#include "blocktune/dataset.hpp"
#include "blocktune/launch.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace blocktune::analysis {

/// Ok runtimes of one kernel on one matrix size.
struct KernelSlice {
    std::string unit_id;
    MatrixSize matrix;
    std::map<BlockConfig, double> runtimes;
};

// Groups rows by (unit_id, matrix), sorted by that key. Every group yields a
// slice even when none of its rows are ok; only ok runtimes of blocks in
// `blocks` are kept.
std::vector<KernelSlice> build_slices(const std::vector<DatasetRow>& rows,
                                      const std::vector<BlockConfig>& blocks = canonical_blocks());

// True when every block has a finite positive runtime.
bool is_complete(const KernelSlice& slice, const std::vector<BlockConfig>& blocks = canonical_blocks());

// Minimal runtime; ties go to the smaller thread count, then (x,y,z) order.
// nullopt for an empty slice.
std::optional<BlockConfig> best_block(const KernelSlice& slice);

// best runtime / block runtime, in (0,1]. Throws ContractViolation when the
// block has no runtime in the slice.
double performance(const KernelSlice& slice, const BlockConfig& block);

struct AnalysisOptions {
    std::vector<BlockConfig> blocks = canonical_blocks();
    BlockConfig largest{1024, 1, 1};
    BlockConfig default_block{1024, 1, 1};
    double threshold = 0.85;  // perf strictly below counts
    double gain = 0.20;       // gain strictly above counts
    std::vector<double> quantile_levels = {0.0, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 1.0};
};

// Linear interpolation between order statistics of sorted values.
double quantile(const std::vector<double>& sorted, double level);

struct LargestVsBest {
    double frac_largest_not_best = 0.0;
    double mean_perf_largest = 0.0;
    std::vector<std::pair<double, double>> perf_quantiles;  // (level, value)
    double frac_perf_below = 0.0;
};

struct GainStats {
    double mean_gain = 0.0;
    double frac_gain_above = 0.0;
};

struct BlockProfile {
    MatrixSize matrix;
    std::size_t slices = 0;
    std::vector<std::pair<BlockConfig, double>> mean_normalized;  // in block order
};

/// Statistics over complete slices. When no slice is complete `empty` is set
/// and the statistic fields keep their zero defaults.
struct AnalysisReport {
    bool empty = true;
    std::size_t n_slices = 0;
    std::size_t n_complete = 0;
    std::size_t n_incomplete = 0;
    std::size_t n_kernels_complete = 0;
    LargestVsBest largest;
    GainStats gain;
    // Same statistics after averaging each kernel's slices.
    LargestVsBest largest_by_kernel;
    GainStats gain_by_kernel;
    std::vector<BlockProfile> profiles;  // one per matrix with complete slices, by matrix order
    std::map<BlockConfig, std::size_t> best_block_counts;

    std::string to_json(const AnalysisOptions& options) const;
};

LargestVsBest largest_vs_best_report(const std::vector<KernelSlice>& complete, const AnalysisOptions& options);
GainStats gain_report(const std::vector<KernelSlice>& complete, const AnalysisOptions& options);
// Mean of runtime(block)/runtime(best) over complete slices of this matrix;
// empty when there are none.
BlockProfile block_profile(const std::vector<KernelSlice>& complete, const MatrixSize& matrix,
                           const std::vector<BlockConfig>& blocks = canonical_blocks());

AnalysisReport analyze(const std::vector<DatasetRow>& rows, const AnalysisOptions& options = {});

// "block,mean_normalized_runtime" rows for one matrix.
std::string profile_csv(const BlockProfile& profile);
// Rows are blocks, columns are matrices.
std::string combined_profile_csv(const std::vector<BlockProfile>& profiles, const std::vector<BlockConfig>& blocks);

// report.json, profile.csv and profile_<w>x<h>.csv in out_dir.
void write_outputs(const AnalysisReport& report, const AnalysisOptions& options, const std::filesystem::path& out_dir);

}  // namespace blocktune::analysis
