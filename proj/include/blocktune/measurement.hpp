#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace blocktune::measure {

enum class Strategy { mean, median, min, max, trimmed_mean_20 };

std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view s);
const std::vector<Strategy>& all_strategies();

// Samples must be non-empty, finite and positive (ContractViolation otherwise).
// trimmed_mean_20 drops floor(n/10) values from each end before averaging.
double aggregate(std::span<const double> samples, Strategy strategy);

struct StabilityReport {
    struct Entry {
        Strategy strategy;
        double spread;  // stddev of the per-repetition aggregates over their mean
    };
    std::vector<Entry> spreads;
    std::size_t pool_size = 0;
    std::size_t sample_size = 0;
    std::size_t repetitions = 0;
    std::uint64_t seed = 0;

    double spread(Strategy s) const;
    // Strategy with the smallest spread; the first listed wins ties.
    Strategy most_stable() const;
    std::string to_json() const;
};

/// Draws `k` distinct pool entries `reps` times. Every strategy aggregates the
/// same draw in a repetition, so spreads are compared on paired samples.
StabilityReport evaluate_strategies(std::span<const double> pool, std::size_t k, std::size_t reps,
                                    std::uint64_t seed,
                                    const std::vector<Strategy>& strategies = all_strategies());

// Right-skewed timings around 1 ms; a fraction of them inflated 1.5x-5x.
std::vector<double> synthetic_pool(std::size_t n, double outlier_fraction, std::uint64_t seed);

// One value per line; blank lines and '#' comments skipped.
std::vector<double> read_samples(const std::filesystem::path& path);

}  // namespace blocktune::measure
