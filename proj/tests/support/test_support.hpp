#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace testsupport {

namespace fs = std::filesystem;

fs::path fixtures();
fs::path cli_binary();

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const fs::path& p) const { return path_ / p; }

private:
    fs::path path_;
};

// Recursively copies a fixture directory to dest (created) and returns dest.
fs::path copy_fixture(const std::string& name, const fs::path& dest);

void write_executable(const fs::path& p, const std::string& content);

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

// In-process dispatch with captured streams.
CliRun run_cli(const std::vector<std::string>& args);

struct ZipItem {
    std::string name;
    std::string data;
};

// Minimal zip writer for fixture servers: stored or raw-deflate members.
std::string make_zip(const std::vector<ZipItem>& items, bool deflate = true);

std::vector<std::string> read_lines(const fs::path& p);

}  // namespace testsupport
