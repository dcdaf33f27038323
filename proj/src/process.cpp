#include "blocktune/process.hpp"

#include "blocktune/text.hpp"

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace blocktune {
namespace {

using Clock = std::chrono::steady_clock;

struct Pipe {
    int fd[2] = {-1, -1};
    bool open(int flags) { return pipe2(fd, flags) == 0; }
    void close_read() { if (fd[0] >= 0) ::close(fd[0]), fd[0] = -1; }
    void close_write() { if (fd[1] >= 0) ::close(fd[1]), fd[1] = -1; }
    ~Pipe() {
        close_read();
        close_write();
    }
};

}  // namespace

std::filesystem::path find_executable(const std::string& name) {
    if (name.empty()) return {};
    if (name.find('/') != std::string::npos) {
        return access(name.c_str(), X_OK) == 0 ? std::filesystem::path(name) : std::filesystem::path();
    }
    const char* path = std::getenv("PATH");
    if (!path) return {};
    for (const auto& dir : split(path, ':')) {
        auto candidate = std::filesystem::path(dir.empty() ? "." : dir) / name;
        if (access(candidate.c_str(), X_OK) == 0 && std::filesystem::is_regular_file(candidate)) return candidate;
    }
    return {};
}

ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options) {
    ProcessResult res;
    if (argv.empty()) {
        res.spawn_failed = true;
        res.error = "empty command";
        return res;
    }
    Pipe out, err, status;
    if (!out.open(O_CLOEXEC) || !err.open(O_CLOEXEC) || !status.open(O_CLOEXEC)) {
        res.spawn_failed = true;
        res.error = std::string("pipe: ") + std::strerror(errno);
        return res;
    }

    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);

    auto start = Clock::now();
    pid_t pid = fork();
    if (pid < 0) {
        res.spawn_failed = true;
        res.error = std::string("fork: ") + std::strerror(errno);
        return res;
    }
    if (pid == 0) {
        setpgid(0, 0);
        dup2(out.fd[1], STDOUT_FILENO);
        dup2(err.fd[1], STDERR_FILENO);
        int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) dup2(devnull, STDIN_FILENO);
        for (const auto& [k, v] : options.env) setenv(k.c_str(), v.c_str(), 1);
        if (!options.cwd.empty() && chdir(options.cwd.c_str()) != 0) {
            int e = errno;
            (void)!write(status.fd[1], &e, sizeof e);
            _exit(127);
        }
        execvp(cargv[0], cargv.data());
        int e = errno;
        (void)!write(status.fd[1], &e, sizeof e);
        _exit(127);
    }
    setpgid(pid, pid);
    out.close_write();
    err.close_write();
    status.close_write();

    int child_errno = 0;
    if (read(status.fd[0], &child_errno, sizeof child_errno) == static_cast<ssize_t>(sizeof child_errno)) {
        int wstatus = 0;
        waitpid(pid, &wstatus, 0);
        res.spawn_failed = true;
        res.error = argv[0] + ": " + std::strerror(child_errno);
        res.wall_s = std::chrono::duration<double>(Clock::now() - start).count();
        return res;
    }

    auto deadline = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(options.timeout_s));
    bool open_out = true;
    bool open_err = true;
    char buf[4096];
    while (open_out || open_err) {
        int wait_ms = -1;
        if (options.timeout_s > 0) {
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
            if (left <= 0) {
                res.timed_out = true;
                kill(-pid, SIGKILL);
                break;
            }
            wait_ms = static_cast<int>(std::min<long long>(left, 100));
        }
        pollfd fds[2] = {{out.fd[0], static_cast<short>(open_out ? POLLIN : 0), 0},
                         {err.fd[0], static_cast<short>(open_err ? POLLIN : 0), 0}};
        int rc = poll(fds, 2, wait_ms);
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (int i = 0; i < 2; ++i) {
            if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            ssize_t n = read(fds[i].fd, buf, sizeof buf);
            if (n > 0) {
                (i == 0 ? res.out : res.err).append(buf, static_cast<std::size_t>(n));
            } else {
                (i == 0 ? open_out : open_err) = false;
            }
        }
    }

    int wstatus = 0;
    if (res.timed_out) {
        waitpid(pid, &wstatus, 0);
    } else {
        // Streams closed; the process may still be running until the deadline.
        while (true) {
            pid_t r = waitpid(pid, &wstatus, WNOHANG);
            if (r == pid) break;
            if (r < 0 && errno != EINTR) break;
            if (options.timeout_s > 0 && Clock::now() >= deadline) {
                res.timed_out = true;
                kill(-pid, SIGKILL);
                waitpid(pid, &wstatus, 0);
                break;
            }
            usleep(1000);
        }
    }
    // Reap anything left in the group (background children of a shell).
    if (!res.timed_out) kill(-pid, SIGKILL);

    res.wall_s = std::chrono::duration<double>(Clock::now() - start).count();
    if (WIFEXITED(wstatus)) res.exit_code = WEXITSTATUS(wstatus);
    if (WIFSIGNALED(wstatus)) res.term_signal = WTERMSIG(wstatus);
    return res;
}

ProcessResult run_shell(const std::string& command, const ProcessOptions& options) {
    return run_process({"/bin/sh", "-c", command}, options);
}

}  // namespace blocktune
