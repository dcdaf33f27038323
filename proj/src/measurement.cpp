#include "blocktune/measurement.hpp"

#include "blocktune/error.hpp"
#include "blocktune/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

namespace blocktune::measure {

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::mean: return "mean";
        case Strategy::median: return "median";
        case Strategy::min: return "min";
        case Strategy::max: return "max";
        case Strategy::trimmed_mean_20: return "trimmed_mean_20";
    }
    return "median";
}

std::optional<Strategy> parse_strategy(std::string_view s) {
    for (auto v : all_strategies()) {
        if (to_string(v) == s) return v;
    }
    return std::nullopt;
}

const std::vector<Strategy>& all_strategies() {
    static const std::vector<Strategy> v = {Strategy::mean, Strategy::median, Strategy::min, Strategy::max,
                                            Strategy::trimmed_mean_20};
    return v;
}

namespace {

double mean_of(std::span<const double> xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

}  // namespace

double aggregate(std::span<const double> samples, Strategy strategy) {
    if (samples.empty()) throw ContractViolation("aggregate of an empty sample");
    for (double x : samples) {
        if (!std::isfinite(x) || x <= 0) throw ContractViolation("samples must be finite and positive");
    }
    switch (strategy) {
        case Strategy::mean: return mean_of(samples);
        case Strategy::min: return *std::min_element(samples.begin(), samples.end());
        case Strategy::max: return *std::max_element(samples.begin(), samples.end());
        case Strategy::median:
        case Strategy::trimmed_mean_20: {
            std::vector<double> s(samples.begin(), samples.end());
            std::sort(s.begin(), s.end());
            std::size_t n = s.size();
            if (strategy == Strategy::median) {
                return n % 2 ? s[n / 2] : (s[n / 2 - 1] + s[n / 2]) / 2.0;
            }
            std::size_t cut = n / 10;
            return mean_of(std::span<const double>(s).subspan(cut, n - 2 * cut));
        }
    }
    throw ContractViolation("unknown strategy");
}

double StabilityReport::spread(Strategy s) const {
    for (const auto& e : spreads) {
        if (e.strategy == s) return e.spread;
    }
    throw ContractViolation("strategy '" + std::string(to_string(s)) + "' not in report");
}

Strategy StabilityReport::most_stable() const {
    if (spreads.empty()) throw ContractViolation("empty report");
    const Entry* best = &spreads.front();
    for (const auto& e : spreads) {
        if (e.spread < best->spread) best = &e;
    }
    return best->strategy;
}

std::string StabilityReport::to_json() const {
    nlohmann::ordered_json j;
    j["pool_size"] = pool_size;
    j["sample_size"] = sample_size;
    j["repetitions"] = repetitions;
    j["seed"] = seed;
    auto& s = j["spreads"] = nlohmann::ordered_json::object();
    for (const auto& e : spreads) s[std::string(to_string(e.strategy))] = e.spread;
    if (!spreads.empty()) j["most_stable"] = std::string(to_string(most_stable()));
    return j.dump(2) + "\n";
}

StabilityReport evaluate_strategies(std::span<const double> pool, std::size_t k, std::size_t reps,
                                    std::uint64_t seed, const std::vector<Strategy>& strategies) {
    if (k < 1 || k > pool.size()) throw ContractViolation("need 1 <= k <= pool size");
    if (reps < 2) throw ContractViolation("need at least two repetitions");
    if (strategies.empty()) throw ContractViolation("no strategies to evaluate");

    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> aggregates(strategies.size());
    std::vector<std::size_t> picks;
    std::unordered_set<std::size_t> seen;
    std::vector<double> sample(k);
    const std::size_t n = pool.size();

    for (std::size_t rep = 0; rep < reps; ++rep) {
        // Floyd's algorithm: k distinct indices in k draws.
        picks.clear();
        seen.clear();
        for (std::size_t j = n - k; j < n; ++j) {
            std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
            std::size_t pick = seen.count(t) ? j : t;
            seen.insert(pick);
            picks.push_back(pick);
        }
        for (std::size_t i = 0; i < k; ++i) sample[i] = pool[picks[i]];
        for (std::size_t s = 0; s < strategies.size(); ++s) {
            aggregates[s].push_back(aggregate(sample, strategies[s]));
        }
    }

    StabilityReport report;
    report.pool_size = n;
    report.sample_size = k;
    report.repetitions = reps;
    report.seed = seed;
    for (std::size_t s = 0; s < strategies.size(); ++s) {
        const auto& a = aggregates[s];
        double spread = 0.0;
        if (std::adjacent_find(a.begin(), a.end(), std::not_equal_to<>()) != a.end()) {
            double m = mean_of(a);
            double ss = 0.0;
            for (double x : a) ss += (x - m) * (x - m);
            spread = std::sqrt(ss / static_cast<double>(a.size() - 1)) / m;
        }
        report.spreads.push_back({strategies[s], spread});
    }
    return report;
}

std::vector<double> synthetic_pool(std::size_t n, double outlier_fraction, std::uint64_t seed) {
    if (outlier_fraction < 0 || outlier_fraction > 1) throw ContractViolation("outlier fraction outside [0,1]");
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> tail(1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> inflate(1.5, 5.0);
    std::vector<double> pool(n);
    for (auto& x : pool) {
        x = 1.0 + 0.03 * tail(rng);
        if (unit(rng) < outlier_fraction) x *= inflate(rng);
    }
    return pool;
}

std::vector<double> read_samples(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("no such file: " + path.string());
    std::vector<double> out;
    int line_no = 0;
    for (const auto& line : split(read_file(path), '\n')) {
        ++line_no;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto v = parse_double(t);
        if (!v) throw Error(path.string() + ":" + std::to_string(line_no) + ": not a number: " + std::string(t));
        out.push_back(*v);
    }
    return out;
}

}  // namespace blocktune::measure
