#include "blocktune/analysis.hpp"

#include "blocktune/error.hpp"
#include "blocktune/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace blocktune::analysis {

using build::RunStatus;

std::vector<KernelSlice> build_slices(const std::vector<DatasetRow>& rows, const std::vector<BlockConfig>& blocks) {
    std::set<BlockConfig> wanted(blocks.begin(), blocks.end());
    std::map<std::pair<std::string, MatrixSize>, KernelSlice> groups;
    for (const auto& r : rows) {
        auto& slice = groups[{r.unit_id, r.matrix}];
        slice.unit_id = r.unit_id;
        slice.matrix = r.matrix;
        if (r.status == RunStatus::ok && wanted.count(r.block)) slice.runtimes.emplace(r.block, r.runtime_ms);
    }
    std::vector<KernelSlice> out;
    out.reserve(groups.size());
    for (auto& [key, slice] : groups) out.push_back(std::move(slice));
    return out;
}

bool is_complete(const KernelSlice& slice, const std::vector<BlockConfig>& blocks) {
    for (const auto& b : blocks) {
        auto it = slice.runtimes.find(b);
        if (it == slice.runtimes.end() || !std::isfinite(it->second) || it->second <= 0) return false;
    }
    return !blocks.empty();
}

std::optional<BlockConfig> best_block(const KernelSlice& slice) {
    std::optional<BlockConfig> best;
    double best_rt = 0.0;
    for (const auto& [b, rt] : slice.runtimes) {
        // Map order is (x,y,z), so an equal (runtime, threads) keeps the earlier block.
        if (!best || rt < best_rt || (rt == best_rt && b.threads() < best->threads())) {
            best = b;
            best_rt = rt;
        }
    }
    return best;
}

double performance(const KernelSlice& slice, const BlockConfig& block) {
    auto best = best_block(slice);
    auto it = slice.runtimes.find(block);
    if (!best || it == slice.runtimes.end()) {
        throw ContractViolation("block " + to_string(block) + " has no runtime in the slice");
    }
    return slice.runtimes.at(*best) / it->second;
}

double quantile(const std::vector<double>& sorted, double level) {
    if (sorted.empty()) throw ContractViolation("quantile of an empty set");
    if (level < 0 || level > 1) throw ContractViolation("quantile level outside [0,1]");
    double pos = level * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

namespace {

double runtime_of(const KernelSlice& s, const BlockConfig& b) {
    auto it = s.runtimes.find(b);
    if (it == s.runtimes.end()) throw ContractViolation("block " + to_string(b) + " missing from slice");
    return it->second;
}

LargestVsBest summarize_perf(const std::vector<double>& perf, std::size_t not_best, const AnalysisOptions& o) {
    LargestVsBest r;
    if (perf.empty()) return r;
    double n = static_cast<double>(perf.size());
    double sum = 0.0;
    std::size_t below = 0;
    for (double p : perf) {
        sum += p;
        if (p < o.threshold) ++below;
    }
    r.frac_largest_not_best = static_cast<double>(not_best) / n;
    r.mean_perf_largest = sum / n;
    r.frac_perf_below = static_cast<double>(below) / n;
    auto sorted = perf;
    std::sort(sorted.begin(), sorted.end());
    for (double q : o.quantile_levels) r.perf_quantiles.emplace_back(q, quantile(sorted, q));
    return r;
}

GainStats summarize_gain(const std::vector<double>& gains, const AnalysisOptions& o) {
    GainStats g;
    if (gains.empty()) return g;
    double sum = 0.0;
    std::size_t above = 0;
    for (double x : gains) {
        sum += x;
        if (x > o.gain) ++above;
    }
    g.mean_gain = sum / static_cast<double>(gains.size());
    g.frac_gain_above = static_cast<double>(above) / static_cast<double>(gains.size());
    return g;
}

double slice_gain(const KernelSlice& s, const BlockConfig& default_block) {
    return runtime_of(s, default_block) / runtime_of(s, *best_block(s)) - 1.0;
}

nlohmann::ordered_json block_json(const BlockConfig& b) { return {b.x, b.y, b.z}; }

nlohmann::ordered_json largest_json(const LargestVsBest& l) {
    nlohmann::ordered_json j;
    j["frac_largest_not_best"] = l.frac_largest_not_best;
    j["mean_perf_largest"] = l.mean_perf_largest;
    auto& q = j["perf_quantiles"] = nlohmann::ordered_json::array();
    for (const auto& [level, value] : l.perf_quantiles) q.push_back({{"level", level}, {"value", value}});
    j["frac_perf_below"] = l.frac_perf_below;
    return j;
}

nlohmann::ordered_json gain_json(const GainStats& g) {
    return {{"mean_gain", g.mean_gain}, {"frac_gain_above", g.frac_gain_above}};
}

}  // namespace

LargestVsBest largest_vs_best_report(const std::vector<KernelSlice>& complete, const AnalysisOptions& options) {
    std::vector<double> perf;
    std::size_t not_best = 0;
    for (const auto& s : complete) {
        if (*best_block(s) != options.largest) ++not_best;
        perf.push_back(performance(s, options.largest));
    }
    return summarize_perf(perf, not_best, options);
}

GainStats gain_report(const std::vector<KernelSlice>& complete, const AnalysisOptions& options) {
    std::vector<double> gains;
    for (const auto& s : complete) gains.push_back(slice_gain(s, options.default_block));
    return summarize_gain(gains, options);
}

BlockProfile block_profile(const std::vector<KernelSlice>& complete, const MatrixSize& matrix,
                           const std::vector<BlockConfig>& blocks) {
    BlockProfile p;
    p.matrix = matrix;
    std::vector<double> sums(blocks.size(), 0.0);
    for (const auto& s : complete) {
        if (s.matrix != matrix) continue;
        ++p.slices;
        double best = runtime_of(s, *best_block(s));
        for (std::size_t i = 0; i < blocks.size(); ++i) sums[i] += runtime_of(s, blocks[i]) / best;
    }
    if (p.slices == 0) return p;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        p.mean_normalized.emplace_back(blocks[i], sums[i] / static_cast<double>(p.slices));
    }
    return p;
}

AnalysisReport analyze(const std::vector<DatasetRow>& rows, const AnalysisOptions& options) {
    auto required = options.blocks;
    for (const auto& b : {options.largest, options.default_block}) {
        if (std::find(required.begin(), required.end(), b) == required.end()) {
            throw ConfigError("block " + to_string(b) + " is not part of the analyzed block set");
        }
    }
    AnalysisReport report;
    auto slices = build_slices(rows, options.blocks);
    std::vector<KernelSlice> complete;
    for (auto& s : slices) {
        if (is_complete(s, options.blocks)) complete.push_back(std::move(s));
    }
    report.n_slices = slices.size();
    report.n_complete = complete.size();
    report.n_incomplete = report.n_slices - report.n_complete;
    if (complete.empty()) return report;
    report.empty = false;

    report.largest = largest_vs_best_report(complete, options);
    report.gain = gain_report(complete, options);
    for (const auto& s : complete) ++report.best_block_counts[*best_block(s)];

    // Slices are sorted by unit id, so each kernel's slices are contiguous.
    std::vector<double> kernel_perf, kernel_gain;
    std::size_t kernel_not_best = 0;
    for (std::size_t i = 0; i < complete.size();) {
        std::size_t j = i;
        double perf_sum = 0.0, gain_sum = 0.0;
        for (; j < complete.size() && complete[j].unit_id == complete[i].unit_id; ++j) {
            perf_sum += performance(complete[j], options.largest);
            gain_sum += slice_gain(complete[j], options.default_block);
        }
        double n = static_cast<double>(j - i);
        kernel_perf.push_back(perf_sum / n);
        kernel_gain.push_back(gain_sum / n);
        if (kernel_perf.back() < 1.0) ++kernel_not_best;
        i = j;
    }
    report.n_kernels_complete = kernel_perf.size();
    report.largest_by_kernel = summarize_perf(kernel_perf, kernel_not_best, options);
    report.gain_by_kernel = summarize_gain(kernel_gain, options);

    std::set<MatrixSize> matrices;
    for (const auto& s : complete) matrices.insert(s.matrix);
    for (const auto& m : matrices) report.profiles.push_back(block_profile(complete, m, options.blocks));
    return report;
}

std::string AnalysisReport::to_json(const AnalysisOptions& options) const {
    nlohmann::ordered_json j;
    j["empty"] = empty;
    j["n_slices"] = n_slices;
    j["n_complete"] = n_complete;
    j["n_incomplete"] = n_incomplete;
    j["n_kernels_complete"] = n_kernels_complete;
    j["threshold"] = options.threshold;
    j["gain_threshold"] = options.gain;
    j["largest_block"] = block_json(options.largest);
    j["default_block"] = block_json(options.default_block);
    j["by_slice"] = largest_json(largest);
    j["by_slice"].update(gain_json(gain));
    j["by_kernel"] = largest_json(largest_by_kernel);
    j["by_kernel"].update(gain_json(gain_by_kernel));
    auto& counts = j["best_block_counts"] = nlohmann::ordered_json::object();
    for (const auto& [b, n] : best_block_counts) counts[to_string(b)] = n;
    auto& profs = j["block_profiles"] = nlohmann::ordered_json::array();
    for (const auto& p : profiles) {
        nlohmann::ordered_json pj;
        pj["matrix"] = {p.matrix.width, p.matrix.height};
        pj["slices"] = p.slices;
        auto& values = pj["mean_normalized_runtime"] = nlohmann::ordered_json::object();
        for (const auto& [b, v] : p.mean_normalized) values[to_string(b)] = v;
        profs.push_back(std::move(pj));
    }
    return j.dump(2) + "\n";
}

std::string profile_csv(const BlockProfile& profile) {
    std::string out = "block,mean_normalized_runtime\n";
    for (const auto& [b, v] : profile.mean_normalized) out += to_string(b) + "," + format_double(v) + "\n";
    return out;
}

std::string combined_profile_csv(const std::vector<BlockProfile>& profiles, const std::vector<BlockConfig>& blocks) {
    std::string out = "block";
    for (const auto& p : profiles) out += "," + to_string(p.matrix);
    out += "\n";
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        out += to_string(blocks[i]);
        for (const auto& p : profiles) {
            out += ",";
            if (i < p.mean_normalized.size()) out += format_double(p.mean_normalized[i].second);
        }
        out += "\n";
    }
    return out;
}

void write_outputs(const AnalysisReport& report, const AnalysisOptions& options, const std::filesystem::path& out_dir) {
    write_file(out_dir / "report.json", report.to_json(options));
    write_file(out_dir / "profile.csv", combined_profile_csv(report.profiles, options.blocks));
    for (const auto& p : report.profiles) {
        write_file(out_dir / ("profile_" + to_string(p.matrix) + ".csv"), profile_csv(p));
    }
}

}  // namespace blocktune::analysis
