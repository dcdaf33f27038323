#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blocktune/harness_synth.hpp"
#include "blocktune/kernel_extractor.hpp"
#include "blocktune/process.hpp"
#include "blocktune/text.hpp"
#include "test_support.hpp"

#include <json.hpp>

#include <random>
#include <regex>

using namespace blocktune;
using namespace blocktune::harness;
using extract::FunctionDecl;
using testsupport::TempDir;

namespace {

FunctionDecl signature(const std::string& name, const std::string& params) {
    FunctionDecl f;
    f.name = name;
    f.qualifier = extract::Qualifier::global;
    f.params = extract::parse_params(params);
    return f;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    for (auto at = s.find(from); at != std::string::npos; at = s.find(from, at + to.size())) {
        s.replace(at, from.size(), to);
    }
    return s;
}

// Builds the harness against the host stub runtime, with launch syntax removed
// so the kernel runs as an ordinary function once per launch.
ProcessResult build_and_run(const TempDir& tmp, const std::string& kernel, const std::string& main_src,
                            std::vector<std::pair<std::string, std::string>> env = {}) {
    write_file(tmp / "kernel.cu", kernel);
    write_file(tmp / "main.cpp", replace_all(main_src, "<<<grid, block>>>", ""));
    auto stub = (testsupport::fixtures() / "cuda_host").string();
    auto cc = run_process({"g++", "-std=c++17", "-x", "c++", "-I" + stub, "-I" + tmp.path().string(), "-o",
                           (tmp / "harness").string(), (tmp / "main.cpp").string()},
                          {.timeout_s = 120});
    REQUIRE_MESSAGE(cc.exit_code == 0, cc.err);
    return run_process({(tmp / "harness").string()}, {.timeout_s = 30, .env = std::move(env)});
}

int count_lines(const std::string& text, const std::string& prefix) {
    int n = 0;
    for (const auto& line : split(text, '\n')) n += line.starts_with(prefix);
    return n;
}

}  // namespace

TEST_CASE("role examples") {
    auto role = [](std::string name, std::string type) {
        return infer_role({name, type, type.find('*') != std::string::npos, ParamRole::unknown});
    };
    CHECK(role("width", "int") == ParamRole::width);
    CHECK(role("n", "int") == ParamRole::size);
    CHECK(role("stride", "int") == ParamRole::static_one);
    CHECK(role("zzz", "float") == ParamRole::static_one);
    CHECK(role("W", "int") == ParamRole::width);
    CHECK(role("N_ROWS", "int") == ParamRole::height);
    CHECK(role("cols", "int") == ParamRole::width);
    CHECK(role("h", "int") == ParamRole::height);
    CHECK(role("len", "int") == ParamRole::size);
    CHECK(role("count", "int") == ParamRole::size);
    CHECK(role("num_bins", "int") == ParamRole::size);
    CHECK(role("k", "int") == ParamRole::k_like);
    CHECK(role("inc_x", "int") == ParamRole::static_one);
    CHECK(role("offset", "int") == ParamRole::static_one);
    CHECK(role("width", "int*") == ParamRole::buffer);
    CHECK(role("", "int") == ParamRole::static_one);
}

TEST_CASE("the first matching rule wins") {
    RoleTable table({{"n*", ParamRole::size}, {"nx", ParamRole::width}});
    CHECK(table.match("nx") == ParamRole::size);
    CHECK(!table.match("x"));
    CHECK(infer_role({"x", "int", false, ParamRole::unknown}, table) == ParamRole::static_one);
}

TEST_CASE("role inference is total and case-insensitive") {
    std::mt19937 rng(99);
    const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_0123456789";
    const std::vector<ParamRole> valid{ParamRole::buffer, ParamRole::width,    ParamRole::height,
                                       ParamRole::size,   ParamRole::k_like,   ParamRole::static_one};
    for (int i = 0; i < 5000; ++i) {
        std::string name;
        int len = static_cast<int>(rng() % 8);
        for (int c = 0; c < len; ++c) name += alphabet[rng() % alphabet.size()];
        bool pointer = rng() % 4 == 0;
        ParamSpec p{name, pointer ? "float*" : "int", pointer, ParamRole::unknown};
        auto r = infer_role(p);
        CHECK(std::find(valid.begin(), valid.end(), r) != valid.end());
        CHECK((r == ParamRole::buffer) == pointer);
        p.name = to_lower(name);
        CHECK(infer_role(p) == r);
    }
}

TEST_CASE("type helpers") {
    CHECK(pointee_type("const float*") == "float");
    CHECK(pointee_type("float * __restrict__") == "float");
    CHECK(pointee_type("void*") == "unsigned char");
    CHECK(pointee_type("double**") == "double*");
    CHECK(pointee_type("unsigned int*") == "unsigned int");
    CHECK(scalar_type("const int") == "int");
    CHECK(scalar_type("unsigned long long") == "unsigned long long");
    CHECK(scalar_type("size_t") == "size_t");
    CHECK(!scalar_type("float4"));
    CHECK(!scalar_type("Params"));
    CHECK(!scalar_type("int&"));

    MatrixSize m{128, 64};
    CHECK(scalar_value(ParamRole::width, m) == 128);
    CHECK(scalar_value(ParamRole::height, m) == 64);
    CHECK(scalar_value(ParamRole::size, m) == 8192);
    CHECK(scalar_value(ParamRole::k_like, m) == 128);
    CHECK(scalar_value(ParamRole::static_one, m) == 1);
}

TEST_CASE("harness for add(int*, int) on 64x64 with 256 threads") {
    auto launch = make_launch(make_block(256), {64, 64});
    auto src = generate_main(signature("add", "int *a, int n"), launch);
    CHECK(src.find("const dim3 grid(16, 1, 1);") != std::string::npos);
    CHECK(src.find("const dim3 block(256, 1, 1);") != std::string::npos);
    CHECK(src.find("#include \"kernel.cu\"") != std::string::npos);

    TempDir tmp;
    auto r = build_and_run(tmp, R"(
#include <cstdio>
__global__ void add(int *a, int n) {
    long long zeros = 0;
    for (int i = 0; i < n; ++i) zeros += a[i] == 0;
    std::fprintf(stderr, "CALL n=%d zeros=%lld\n", n, zeros);
}
)",
                           src);
    CHECK(r.exit_code == 0);
    CHECK(r.out == "RUNTIME_MS: 2.500000\n");
    CHECK(count_lines(r.err, "ALLOC 16384") == 1);
    CHECK(count_lines(r.err, "ALLOC") == 1);
    CHECK(count_lines(r.err, "CALL n=4096 zeros=4096") == 1 + kTimedLaunches);
    CHECK(count_lines(r.err, "FREE") == 1);
}

TEST_CASE("harness for a 2D kernel on 128x64 with 16x16 blocks") {
    auto launch = make_launch(make_block(16, 16), {128, 64});
    auto src = generate_main(signature("blur", "const float *in, float *out, int w, int h"), launch);
    CHECK(src.find("const dim3 grid(8, 4, 1);") != std::string::npos);
    CHECK(src.find("const dim3 block(16, 16, 1);") != std::string::npos);

    TempDir tmp;
    auto r = build_and_run(tmp, R"(
#include <cstdio>
__global__ void blur(const float *in, float *out, int w, int h) {
    out[w * h - 1] = in[w * h - 1];
    std::fprintf(stderr, "CALL w=%d h=%d\n", w, h);
}
)",
                           src);
    CHECK(r.exit_code == 0);
    CHECK(count_lines(r.err, "ALLOC 32768") == 2);
    CHECK(count_lines(r.err, "CALL w=128 h=64") == 1 + kTimedLaunches);
    CHECK(count_lines(r.out, "RUNTIME_MS: ") == 1);
}

TEST_CASE("harness with zero parameters") {
    auto src = generate_main(signature("noop", ""), make_launch(make_block(64), {1, 1}));
    CHECK(src.find("noop<<<grid, block>>>();") != std::string::npos);
    CHECK(src.find("cudaMalloc") == std::string::npos);

    TempDir tmp;
    auto r = build_and_run(tmp, "__global__ void noop() {}\n", src);
    CHECK(r.exit_code == 0);
    CHECK(r.out == "RUNTIME_MS: 2.500000\n");
}

TEST_CASE("harness reports kernel errors instead of a runtime") {
    auto src = generate_main(signature("noop", ""), make_launch(make_block(64), {8, 8}));
    TempDir tmp;
    auto r = build_and_run(tmp, "__global__ void noop() {}\n", src, {{"STUB_CUDA_ERROR", "719"}});
    CHECK(r.exit_code != 0);
    CHECK(r.out == "KERNEL_ERROR: 719\n");
}

TEST_CASE("scalar roles and element types in the harness") {
    auto launch = make_launch(make_block(128), {240, 100});
    auto src = generate_main(
        signature("mixed", "double *d, void *raw, unsigned char *bytes, int rows, int cols, int k, int stride, float scale"),
        launch);
    TempDir tmp;
    auto r = build_and_run(tmp, R"(
#include <cstdio>
__global__ void mixed(double *d, void *raw, unsigned char *bytes, int rows, int cols, int k, int stride, float scale) {
    std::fprintf(stderr, "CALL %d %d %d %d %g\n", rows, cols, k, stride, scale);
}
)",
                           src);
    CHECK(r.exit_code == 0);
    CHECK(count_lines(r.err, "ALLOC 192000") == 1);
    CHECK(count_lines(r.err, "ALLOC 24000") == 2);
    CHECK(count_lines(r.err, "CALL 100 240 240 1 1") == 1 + kTimedLaunches);
}

TEST_CASE("harness generation is deterministic") {
    auto sig = signature("gemv", "const float *mat, const float *vec, float *out, int rows, int cols");
    for (const auto& m : default_matrices()) {
        for (const auto& b : canonical_blocks()) {
            auto launch = make_launch(b, m);
            CHECK(generate_main(sig, launch) == generate_main(sig, launch));
        }
    }
    CHECK(generate_main(sig, make_launch(make_block(64), {240, 240})) !=
          generate_main(sig, make_launch(make_block(128), {240, 240})));
}

TEST_CASE("unsupported parameter types fail the harness") {
    auto launch = make_launch(make_block(64), {16, 16});
    CHECK_THROWS_AS(generate_main(signature("s", "Params p, int n"), launch), HarnessError);
    CHECK_THROWS_AS(generate_main(signature("v", "float4 v"), launch), HarnessError);
    CHECK_THROWS_AS(generate_main(signature("r", "int &r"), launch), HarnessError);
}

TEST_CASE("most fixture scalars match a named rule") {
    std::size_t scalars = 0;
    std::size_t matched = 0;
    for (const auto& line : testsupport::read_lines(testsupport::fixtures() / "corpus_oracle.jsonl")) {
        if (trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        for (const auto& p : j["params"]) {
            if (p["pointer"].get<bool>()) continue;
            ++scalars;
            matched += RoleTable::standard().match(p["name"].get<std::string>()).has_value();
        }
    }
    REQUIRE(scalars > 0);
    MESSAGE("scalar params matched by a named rule: " << matched << "/" << scalars);
    CHECK(static_cast<double>(matched) / static_cast<double>(scalars) >= 0.90);
}
