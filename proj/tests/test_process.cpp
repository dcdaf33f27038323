#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blocktune/process.hpp"
#include "test_support.hpp"

using namespace blocktune;

TEST_CASE("captures both streams and the exit code") {
    auto r = run_shell("echo out; echo err >&2; exit 3");
    CHECK(r.out == "out\n");
    CHECK(r.err == "err\n");
    CHECK(r.exit_code == 3);
    CHECK(!r.timed_out);
    CHECK(!r.spawn_failed);
}

TEST_CASE("signals are reported") {
    auto r = run_shell("kill -9 $$");
    CHECK(r.term_signal == 9);
}

TEST_CASE("timeouts kill the whole process group promptly") {
    auto r = run_shell("sleep 10 & sleep 10; echo never", {.timeout_s = 1.0});
    CHECK(r.timed_out);
    CHECK(r.wall_s < 1.5);
    CHECK(r.out.empty());
}

TEST_CASE("spawn failures are distinguished from exits") {
    auto r = run_process({"/definitely/not/here"});
    CHECK(r.spawn_failed);
    CHECK(r.error.find("No such file") != std::string::npos);
    CHECK(run_process({}).spawn_failed);
}

TEST_CASE("environment and working directory") {
    testsupport::TempDir tmp;
    auto r = run_shell("echo $BT_PROBE; pwd", {.cwd = tmp.path(), .env = {{"BT_PROBE", "hello"}}});
    CHECK(r.out == "hello\n" + std::filesystem::canonical(tmp.path()).string() + "\n");
}

TEST_CASE("executable lookup") {
    CHECK(!find_executable("sh").empty());
    CHECK(find_executable("no-such-tool-anywhere").empty());
    CHECK(find_executable("/bin/sh") == "/bin/sh");
}
