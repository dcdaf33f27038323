#include "blocktune/dataset.hpp"

#include "blocktune/error.hpp"
#include "blocktune/text.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>

namespace blocktune {

using build::RunStatus;

RowKey row_key(const DatasetRow& row) { return {row.unit_id, row.matrix, row.block}; }

std::optional<std::string> validate_row(const DatasetRow& row) {
    if (row.unit_id.empty()) return "empty unit_id";
    if (!row.block.valid()) return "illegal block " + to_string(row.block);
    if (row.matrix.width < 1 || row.matrix.height < 1) return "non-positive matrix size";
    bool ok = row.status == RunStatus::ok;
    if (ok && !(std::isfinite(row.runtime_ms) && row.runtime_ms > 0)) return "ok row without a positive runtime";
    if (!ok && !std::isnan(row.runtime_ms)) return "non-ok row with a runtime";
    return std::nullopt;
}

namespace {

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// RFC 4180 records; a trailing newline does not open a new record.
std::vector<std::vector<std::string>> csv_records(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> rec;
    std::string field;
    bool quoted = false;
    bool closed = false;  // just left a quoted field
    bool at_start = true;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                    closed = true;
                }
            } else {
                field += c;
            }
            continue;
        }
        any = true;
        if (c == ',') {
            rec.push_back(std::move(field));
            field.clear();
            closed = false;
            at_start = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            rec.push_back(std::move(field));
            field.clear();
            records.push_back(std::move(rec));
            rec.clear();
            any = false;
            closed = false;
            at_start = true;
        } else if (closed) {
            throw Error("csv: text after closing quote in record " + std::to_string(records.size() + 1));
        } else if (c == '"') {
            if (!at_start) throw Error("csv: stray quote in record " + std::to_string(records.size() + 1));
            quoted = true;
            at_start = false;
        } else {
            field += c;
            at_start = false;
        }
    }
    if (quoted) throw Error("csv: unterminated quoted field");
    if (any || !field.empty() || !rec.empty()) {
        rec.push_back(std::move(field));
        records.push_back(std::move(rec));
    }
    return records;
}

template <typename T>
T need(std::optional<T> v, std::string_view what, std::size_t record) {
    if (!v) throw Error("csv record " + std::to_string(record) + ": bad " + std::string(what));
    return *v;
}

}  // namespace

std::string csv_line(const DatasetRow& r) {
    std::string s;
    s += csv_field(r.unit_id) + ',';
    s += csv_field(r.function_name) + ',';
    s += std::to_string(r.repo_index) + ',';
    s += std::to_string(r.matrix.width) + ',' + std::to_string(r.matrix.height) + ',';
    s += std::to_string(r.block.x) + ',' + std::to_string(r.block.y) + ',' + std::to_string(r.block.z) + ',';
    s += format_double(r.runtime_ms) + ',';
    s += std::string(build::to_string(r.status)) + ',';
    s += std::to_string(r.device_id) + ',';
    s += std::string(build::to_string(r.backend)) + ',';
    s += csv_field(r.timestamp);
    return s;
}

std::string to_csv(const std::vector<DatasetRow>& rows) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& r : rows) out += csv_line(r) + '\n';
    return out;
}

std::vector<DatasetRow> parse_csv(std::string_view text) {
    auto records = csv_records(text);
    if (records.empty()) throw Error("csv: missing header");
    auto header = split(kCsvHeader, ',');
    if (records.front() != header) throw Error("csv: unexpected header");
    std::vector<DatasetRow> rows;
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& f = records[i];
        if (f.size() == 1 && f[0].empty()) continue;
        if (f.size() != header.size()) {
            throw Error("csv record " + std::to_string(i) + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(f.size()));
        }
        DatasetRow r;
        r.unit_id = f[0];
        r.function_name = f[1];
        r.repo_index = static_cast<std::size_t>(need(parse_int64(f[2]), "repo_index", i));
        r.matrix = {need(parse_int(f[3]), "matrix_width", i), need(parse_int(f[4]), "matrix_height", i)};
        r.block = {need(parse_int(f[5]), "block_x", i), need(parse_int(f[6]), "block_y", i),
                   need(parse_int(f[7]), "block_z", i)};
        r.runtime_ms = need(parse_double(f[8]), "runtime_ms", i);
        r.status = need(build::parse_run_status(f[9]), "status", i);
        r.device_id = need(parse_int(f[10]), "device_id", i);
        r.backend = need(build::parse_backend(f[11]), "backend", i);
        r.timestamp = f[12];
        if (auto err = validate_row(r)) throw Error("csv record " + std::to_string(i) + ": " + *err);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<DatasetRow> read_csv(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("no such file: " + path.string());
    return parse_csv(read_file(path));
}

std::string jsonl_line(const DatasetRow& r) {
    nlohmann::ordered_json j;
    j["unit_id"] = r.unit_id;
    j["function_name"] = r.function_name;
    j["repo_index"] = r.repo_index;
    j["matrix"] = {r.matrix.width, r.matrix.height};
    j["block"] = {r.block.x, r.block.y, r.block.z};
    j["runtime_ms"] = std::isnan(r.runtime_ms) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.runtime_ms);
    j["status"] = build::to_string(r.status);
    j["device_id"] = r.device_id;
    j["backend"] = build::to_string(r.backend);
    j["timestamp"] = r.timestamp;
    return j.dump();
}

std::vector<DatasetRow> read_jsonl(const std::filesystem::path& path) {
    std::vector<DatasetRow> rows;
    if (!std::filesystem::exists(path)) return rows;
    auto lines = split(read_file(path), '\n');
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        bool last = i + 1 == lines.size();
        try {
            auto j = nlohmann::json::parse(lines[i]);
            DatasetRow r;
            r.unit_id = j.at("unit_id").get<std::string>();
            r.function_name = j.at("function_name").get<std::string>();
            r.repo_index = j.at("repo_index").get<std::size_t>();
            r.matrix = {j.at("matrix").at(0).get<int>(), j.at("matrix").at(1).get<int>()};
            r.block = {j.at("block").at(0).get<int>(), j.at("block").at(1).get<int>(), j.at("block").at(2).get<int>()};
            const auto& rt = j.at("runtime_ms");
            r.runtime_ms = rt.is_null() ? std::numeric_limits<double>::quiet_NaN() : rt.get<double>();
            auto status = build::parse_run_status(j.at("status").get<std::string>());
            auto backend = build::parse_backend(j.at("backend").get<std::string>());
            if (!status || !backend) throw Error("bad enum");
            r.status = *status;
            r.backend = *backend;
            r.device_id = j.at("device_id").get<int>();
            r.timestamp = j.at("timestamp").get<std::string>();
            if (auto err = validate_row(r)) throw Error(*err);
            rows.push_back(std::move(r));
        } catch (const std::exception& e) {
            // An interrupted append leaves at most one partial line at the end.
            if (last) break;
            throw Error(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return rows;
}

std::string DatasetStats::to_json() const {
    nlohmann::ordered_json j;
    j["rows"] = rows;
    j["non_nan"] = non_nan;
    j["non_nan_fraction"] = non_nan_fraction;
    j["status_counts"] = status_counts;
    j["distinct_units"] = distinct_units;
    return j.dump(2) + "\n";
}

DatasetStats dataset_stats(const std::vector<DatasetRow>& rows) {
    DatasetStats s;
    std::set<std::string> units;
    for (const auto& r : rows) {
        ++s.rows;
        if (!std::isnan(r.runtime_ms)) ++s.non_nan;
        ++s.status_counts[std::string(build::to_string(r.status))];
        units.insert(r.unit_id);
    }
    s.distinct_units = units.size();
    s.non_nan_fraction = s.rows ? static_cast<double>(s.non_nan) / static_cast<double>(s.rows) : 0.0;
    return s;
}

}  // namespace blocktune
