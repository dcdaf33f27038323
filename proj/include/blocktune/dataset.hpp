#pragma once

#include "blocktune/build_exec.hpp"
#include "blocktune/launch.hpp"

#include <compare>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blocktune {

inline constexpr std::string_view kCsvHeader =
    "unit_id,function_name,repo_index,matrix_width,matrix_height,block_x,block_y,block_z,runtime_ms,status,"
    "device_id,backend,timestamp";

struct DatasetRow {
    std::string unit_id;
    std::string function_name;
    std::size_t repo_index = 0;
    MatrixSize matrix;
    BlockConfig block;
    double runtime_ms = std::numeric_limits<double>::quiet_NaN();
    build::RunStatus status = build::RunStatus::parse_error;
    int device_id = 0;
    build::BackendKind backend = build::BackendKind::simulated;
    std::string timestamp;  // RFC 3339 UTC, or empty when suppressed
};

struct RowKey {
    std::string unit_id;
    MatrixSize matrix;
    BlockConfig block;

    friend auto operator<=>(const RowKey&, const RowKey&) = default;
    friend bool operator==(const RowKey&, const RowKey&) = default;
};

RowKey row_key(const DatasetRow& row);

// Empty when the row honours the schema (NaN exactly when status is not ok).
std::optional<std::string> validate_row(const DatasetRow& row);

std::string csv_line(const DatasetRow& row);
std::string to_csv(const std::vector<DatasetRow>& rows);
// Throws Error on a wrong header or malformed record.
std::vector<DatasetRow> parse_csv(std::string_view text);
std::vector<DatasetRow> read_csv(const std::filesystem::path& path);

std::string jsonl_line(const DatasetRow& row);
// Skips a truncated final line left behind by an interrupted writer.
std::vector<DatasetRow> read_jsonl(const std::filesystem::path& path);

struct DatasetStats {
    std::size_t rows = 0;
    std::size_t non_nan = 0;
    double non_nan_fraction = 0.0;  // 0 for an empty dataset
    std::map<std::string, std::size_t> status_counts;
    std::size_t distinct_units = 0;

    std::string to_json() const;
};

DatasetStats dataset_stats(const std::vector<DatasetRow>& rows);

}  // namespace blocktune
