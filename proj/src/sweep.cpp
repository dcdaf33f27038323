#include "blocktune/sweep.hpp"

#include "blocktune/error.hpp"
#include "blocktune/text.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

namespace fs = std::filesystem;

namespace blocktune::sweep {

using build::RunStatus;

void SweepSpace::validate() const {
    if (matrices.empty() || blocks.empty()) throw ContractViolation("sweep space has an empty axis");
    std::set<BlockConfig> seen_blocks;
    for (const auto& b : blocks) {
        if (!b.valid()) throw ContractViolation("illegal block " + to_string(b));
        if (!seen_blocks.insert(b).second) throw ContractViolation("repeated block " + to_string(b));
    }
    std::set<MatrixSize> seen_matrices;
    for (const auto& m : matrices) {
        if (m.width < 1 || m.height < 1) throw ContractViolation("non-positive matrix size");
        if (!seen_matrices.insert(m).second) throw ContractViolation("repeated matrix " + to_string(m));
    }
}

SweepSpace canonical_space(const std::vector<MatrixSize>& matrices) { return {matrices, canonical_blocks()}; }

std::vector<DatasetRow> compact(std::vector<DatasetRow> rows, const SweepSpace& space) {
    auto index_of = [](const auto& list, const auto& v) {
        return static_cast<std::size_t>(std::find(list.begin(), list.end(), v) - list.begin());
    };
    std::set<RowKey> seen;
    std::vector<DatasetRow> out;
    out.reserve(rows.size());
    for (auto& r : rows) {
        if (seen.insert(row_key(r)).second) out.push_back(std::move(r));
    }
    std::stable_sort(out.begin(), out.end(), [&](const DatasetRow& a, const DatasetRow& b) {
        if (a.unit_id != b.unit_id) return a.unit_id < b.unit_id;
        auto ma = index_of(space.matrices, a.matrix), mb = index_of(space.matrices, b.matrix);
        if (ma != mb) return ma < mb;
        if (a.matrix != b.matrix) return a.matrix < b.matrix;
        auto ba = index_of(space.blocks, a.block), bb = index_of(space.blocks, b.block);
        if (ba != bb) return ba < bb;
        return a.block < b.block;
    });
    return out;
}

namespace {

struct Task {
    const SweepUnit* unit;
    MatrixSize matrix;
    BlockConfig block;
};

// Drops a partial trailing line so appends start on a fresh line.
void repair_tail(const fs::path& path) {
    if (!fs::exists(path)) return;
    std::string content = read_file(path);
    if (content.empty() || content.back() == '\n') return;
    auto cut = content.rfind('\n');
    fs::resize_file(path, cut == std::string::npos ? 0 : cut + 1);
}

long long now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

SweepResult run_sweep(const std::vector<SweepUnit>& units, const SweepSpace& space, build::Executor& executor,
                      const SweepOptions& options) {
    space.validate();
    if (options.repeats < 1) throw ContractViolation("repeats must be at least 1");
    if (!(options.timeout_s > 0)) throw ContractViolation("timeout must be positive");
    if (options.devices.empty()) throw ContractViolation("no devices to run on");
    if (std::set<int>(options.devices.begin(), options.devices.end()).size() != options.devices.size()) {
        throw ContractViolation("device ids must be distinct");
    }
    if (options.jsonl.empty()) throw ContractViolation("sweep needs a JSONL output path");

    repair_tail(options.jsonl);
    auto existing = read_jsonl(options.jsonl);
    std::set<RowKey> present;
    for (const auto& r : existing) present.insert(row_key(r));

    SweepResult result;
    std::vector<Task> tasks;
    for (const auto& u : units) {
        for (const auto& m : space.matrices) {
            for (const auto& b : space.blocks) {
                if (present.count(RowKey{u.handle.id, m, b})) {
                    ++result.skipped;
                } else {
                    tasks.push_back({&u, m, b});
                }
            }
        }
    }

    if (!options.jsonl.parent_path().empty()) fs::create_directories(options.jsonl.parent_path());
    std::ofstream out(options.jsonl, std::ios::app | std::ios::binary);
    if (!out) throw Error("cannot append to " + options.jsonl.string());
    std::ofstream exec_log;
    if (!options.execution_log.empty()) {
        exec_log.open(options.execution_log, std::ios::app);
        if (!exec_log) throw Error("cannot open " + options.execution_log.string());
    }

    std::mutex writer;
    std::vector<DatasetRow> produced;
    std::atomic<bool> stop{false};
    std::exception_ptr failure;

    // Task i goes to device slot i % n, so device ids in the output do not
    // depend on thread timing.
    const std::size_t n_devices = options.devices.size();
    auto worker = [&](std::size_t slot) {
        const int device = options.devices[slot];
        try {
            for (std::size_t i = slot; i < tasks.size() && !stop; i += n_devices) {
                const auto& t = tasks[i];
                auto launch = make_launch(t.block, t.matrix);
                std::vector<double> ok;
                std::optional<RunStatus> bad;
                for (int rep = 0; rep < options.repeats; ++rep) {
                    long long start = now_ns();
                    auto r = executor.run(t.unit->handle, launch, options.timeout_s, device);
                    long long end = now_ns();
                    if (exec_log.is_open()) {
                        std::lock_guard lock(writer);
                        exec_log << device << ' ' << start << ' ' << end << '\n';
                    }
                    if (r.status == RunStatus::timeout) {
                        bad = RunStatus::timeout;
                        ok.clear();
                        break;
                    }
                    if (r.status == RunStatus::ok) {
                        ok.push_back(r.runtime_ms);
                    } else if (!bad) {
                        bad = r.status;
                    }
                }
                DatasetRow row;
                row.unit_id = t.unit->handle.id;
                row.function_name = t.unit->function_name;
                row.repo_index = t.unit->repo_index;
                row.matrix = t.matrix;
                row.block = t.block;
                if (!ok.empty()) {
                    row.status = RunStatus::ok;
                    row.runtime_ms = measure::aggregate(ok, options.strategy);
                } else {
                    row.status = *bad;
                }
                row.device_id = device;
                row.backend = executor.kind();
                if (options.timestamps) row.timestamp = utc_timestamp();

                std::lock_guard lock(writer);
                out << jsonl_line(row) << '\n';
                out.flush();
                produced.push_back(std::move(row));
            }
        } catch (...) {
            std::lock_guard lock(writer);
            if (!failure) failure = std::current_exception();
            stop = true;
        }
    };

    {
        std::vector<std::jthread> workers;
        for (std::size_t slot = 0; slot < n_devices; ++slot) workers.emplace_back(worker, slot);
    }
    out.close();
    if (failure) std::rethrow_exception(failure);

    result.executed = produced.size();
    existing.insert(existing.end(), std::make_move_iterator(produced.begin()),
                    std::make_move_iterator(produced.end()));
    result.rows = compact(std::move(existing), space);
    if (!options.csv.empty()) write_file(options.csv, to_csv(result.rows));
    return result;
}

}  // namespace blocktune::sweep
