#pragma once

#include "blocktune/corpus_miner.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blocktune::extract {

using corpus::SourceFile;

enum class Qualifier { global, device };

enum class ParamRole { unknown, buffer, width, height, size, k_like, static_one };

std::string_view to_string(ParamRole r);

struct ParamSpec {
    std::string name;       // empty for unnamed parameters
    std::string type_text;  // declared type with the name removed, e.g. "const float*"
    bool is_pointer = false;
    ParamRole role = ParamRole::unknown;

    friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

struct ByteRange {
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct FunctionDecl {
    std::string name;
    Qualifier qualifier = Qualifier::device;
    SourceFile source_file;
    ByteRange decl_span;  // first specifier token through the closing brace
    ByteRange body_span;  // '{' through '}'
    std::vector<ParamSpec> params;
    bool is_template = false;
    std::vector<std::string> flags;  // launch_bounds, extern_shared, texture
};

struct ScanResult {
    std::vector<FunctionDecl> functions;
    std::vector<std::string> diagnostics;
};

// Every function definition carrying __global__ or __device__ at namespace
// scope. Prototypes and class members are ignored. An unbalanced brace stops
// the scan with a diagnostic; functions closed before it are returned.
ScanResult scan_functions(std::string_view content, const SourceFile& file);

std::vector<ParamSpec> parse_params(std::string_view param_list);

struct IncludeLine {
    std::string text;    // the directive as written
    std::string target;  // path between the delimiters
    bool quoted = false;
};

std::vector<IncludeLine> include_lines(std::string_view content);

/// Source files of one repository, loaded and scanned once.
class Repo {
public:
    Repo(std::filesystem::path dir, std::vector<SourceFile> files);
    Repo(const Repo&) = delete;
    Repo& operator=(const Repo&) = delete;
    Repo(Repo&&) = default;

    // Lists and classifies every source file below dir.
    static Repo load(const std::filesystem::path& dir, std::size_t repo_index);

    const std::filesystem::path& dir() const { return dir_; }
    const std::vector<SourceFile>& files() const { return files_; }
    const std::string& content(const std::string& rel) const;
    const ScanResult& scan(const std::string& rel) const;
    const SourceFile* find(const std::string& rel) const;

    // Quoted include resolution: includer's directory, then repo root.
    std::optional<std::string> resolve_include(const std::string& includer,
                                               const std::string& target) const;

    // Device function definitions with this name, in file order.
    std::vector<const FunctionDecl*> device_definitions(std::string_view name) const;

    std::vector<const FunctionDecl*> global_functions() const;

private:
    std::filesystem::path dir_;
    std::vector<SourceFile> files_;
    std::map<std::string, std::string> contents_;
    std::map<std::string, ScanResult> scans_;
    std::multimap<std::string, const FunctionDecl*, std::less<>> device_by_name_;
};

struct Closure {
    std::vector<SourceFile> deps;             // sorted by path; includes the entry's file
    std::vector<FunctionDecl> device_fns;     // in emission order
    std::vector<std::string> extra_includes;  // headers kernel.cu must include explicitly
    std::vector<std::string> diagnostics;
};

// Fixed point over quoted includes and device-function references starting
// from the kernel body. System includes are never followed.
Closure closure(const FunctionDecl& entry, const Repo& repo);

struct KernelUnit {
    std::string id;
    FunctionDecl entry;
    std::vector<SourceFile> deps;
    std::vector<FunctionDecl> device_fns;
    std::filesystem::path folder;
    std::vector<std::string> flags;
    std::vector<std::string> diagnostics;
};

std::string unit_id(const FunctionDecl& entry);

// Source text of the isolated kernel.cu.
std::string render_kernel_source(const FunctionDecl& entry, const Closure& c, const Repo& repo);
std::string params_json(const FunctionDecl& entry);

// Writes the unit folder below units_root. On an id collision the id gets a
// "-2" suffix; a second collision throws Error.
KernelUnit isolate(const FunctionDecl& entry, const Closure& c, const Repo& repo,
                   const std::filesystem::path& units_root);

enum class CandidateStatus { ok, non_buildable, failed };

std::string_view to_string(CandidateStatus s);

struct CandidateRecord {
    std::string id;
    std::size_t repo_index = 0;
    std::string file;
    std::string function;
    CandidateStatus status = CandidateStatus::ok;
    std::vector<ParamSpec> params;
    std::vector<std::string> deps;
    std::vector<std::string> device_fns;
    std::vector<std::string> flags;
    std::vector<std::string> diagnostics;
};

inline constexpr std::string_view kExtractManifest = "extract_manifest.jsonl";
inline constexpr std::string_view kUnitsDir = "units";

std::vector<CandidateRecord> extract_repo(const Repo& repo, const std::filesystem::path& units_root);

// Extracts every downloaded repository of a mined corpus into
// <corpus>/units and writes <corpus>/extract_manifest.jsonl.
std::vector<CandidateRecord> extract_corpus(const std::filesystem::path& corpus_root);

std::string manifest_line(const CandidateRecord& r);
std::vector<CandidateRecord> read_manifest(const std::filesystem::path& path);

// Reloads a unit's parameter list from its params.json.
FunctionDecl load_unit_signature(const std::filesystem::path& unit_folder);

}  // namespace blocktune::extract
