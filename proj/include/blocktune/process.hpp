#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace blocktune {

struct ProcessResult {
    int exit_code = -1;  // valid when the process exited normally
    int term_signal = 0;
    bool timed_out = false;
    bool spawn_failed = false;
    std::string out;
    std::string err;
    double wall_s = 0.0;
    std::string error;  // spawn failure reason
};

struct ProcessOptions {
    double timeout_s = 0.0;  // <= 0 waits forever
    std::filesystem::path cwd;
    std::vector<std::pair<std::string, std::string>> env;  // added to the inherited environment
};

// Runs argv[0] (PATH lookup) in its own process group and captures both
// streams. On timeout the whole group is killed with SIGKILL.
ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options = {});

ProcessResult run_shell(const std::string& command, const ProcessOptions& options = {});

// Absolute path of an executable: the name itself when it contains '/',
// otherwise a PATH search. Empty when not found.
std::filesystem::path find_executable(const std::string& name);

}  // namespace blocktune
