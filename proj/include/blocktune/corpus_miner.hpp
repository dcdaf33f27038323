#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blocktune::corpus {

enum class RepoStatus { pending, downloaded, missing, failed };

std::string_view to_string(RepoStatus s);
std::optional<RepoStatus> parse_repo_status(std::string_view s);

struct RepoRef {
    std::size_t index = 0;
    std::string url;
    RepoStatus status = RepoStatus::pending;
    std::string diagnostic;
};

enum class SourceKind { c, cpp, cu, header };

std::string_view to_string(SourceKind k);

struct SourceFile {
    std::size_t repo_index = 0;
    std::string relative_path;  // forward slashes, relative to the repo folder
    SourceKind kind = SourceKind::cu;

    friend bool operator==(const SourceFile&, const SourceFile&) = default;
};

// Kind by extension: .c, .cpp, .cc, .cu, .h, .hpp, .cuh. Anything else is
// not a source file.
std::optional<SourceKind> classify(const std::filesystem::path& p);

struct Url {
    std::string scheme;
    std::string host;
    int port = 0;
    std::string path;  // begins with '/', may be just "/"
};

std::optional<Url> parse_url(std::string_view text);

// One URL per line; blank lines and '#' comments skipped. Malformed lines
// become failed refs so every retained line keeps its positional index.
std::vector<RepoRef> load_repo_list(const std::filesystem::path& path);

struct FetchOptions {
    std::vector<std::string> branches{"master", "main"};
    int max_redirects = 5;
    int timeout_s = 60;
};

// Downloads "<url>/archive/<branch>.zip" and unpacks it to dest_root/<index>/.
// 404/410 on every branch marks the repo missing; any other failure marks it
// failed with a diagnostic. Local write failures throw.
RepoRef fetch_repo(RepoRef ref, const std::filesystem::path& dest_root,
                   const FetchOptions& options = {});

// Deletes every non-source file below repo_dir (and directories left empty)
// and returns the retained files sorted by relative path.
std::vector<SourceFile> filter_sources(const std::filesystem::path& repo_dir,
                                       std::size_t repo_index = 0);

struct MineOptions {
    int concurrency = 8;
    FetchOptions fetch;
};

// Full mining stage: load list, fetch in parallel, filter downloaded repos,
// write <dest_root>/mine_manifest.jsonl ordered by index.
std::vector<RepoRef> mine(const std::filesystem::path& repo_list,
                          const std::filesystem::path& dest_root, const MineOptions& options = {});

inline constexpr std::string_view kMineManifest = "mine_manifest.jsonl";

std::string manifest_line(const RepoRef& ref);
void write_manifest(const std::filesystem::path& path, const std::vector<RepoRef>& refs);
std::vector<RepoRef> read_manifest(const std::filesystem::path& path);

}  // namespace blocktune::corpus
