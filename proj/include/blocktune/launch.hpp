#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blocktune {

inline constexpr int kMaxThreadsPerBlock = 1024;
inline constexpr int kWarpSize = 32;

/// Thread-block shape. Legal blocks have at most 1024 threads and a thread
/// count that is a whole number of warps.
struct BlockConfig {
    int x = 1;
    int y = 1;
    int z = 1;

    constexpr long long threads() const { return static_cast<long long>(x) * y * z; }
    constexpr bool is_1d() const { return y == 1 && z == 1; }
    constexpr bool is_2d() const { return z == 1 && y > 1; }

    constexpr bool valid() const {
        return x >= 1 && y >= 1 && z >= 1 && threads() <= kMaxThreadsPerBlock &&
               threads() % kWarpSize == 0;
    }

    friend constexpr auto operator<=>(const BlockConfig&, const BlockConfig&) = default;
};

// Throws ContractViolation when the shape is illegal.
BlockConfig make_block(int x, int y = 1, int z = 1);

// "64x1x1", "16x16" (z defaults to 1) or "256".
BlockConfig parse_block(std::string_view text);
std::string to_string(const BlockConfig& b);

struct MatrixSize {
    int width = 1;
    int height = 1;

    constexpr long long elements() const { return static_cast<long long>(width) * height; }

    friend constexpr auto operator<=>(const MatrixSize&, const MatrixSize&) = default;
};

MatrixSize make_matrix(int width, int height);
// "240x240" or "240".
MatrixSize parse_matrix(std::string_view text);
std::string to_string(const MatrixSize& m);

struct Grid {
    long long gx = 1;
    long long gy = 1;
    long long gz = 1;

    friend constexpr bool operator==(const Grid&, const Grid&) = default;
};

struct LaunchConfig {
    BlockConfig block;
    Grid grid;
    MatrixSize matrix;

    friend constexpr bool operator==(const LaunchConfig&, const LaunchConfig&) = default;
};

/// 1D blocks tile the flattened element count; 2D and 3D blocks tile
/// width by height (the depth axis is a single layer, so gz is always 1).
Grid compute_grid(const BlockConfig& block, const MatrixSize& matrix);

LaunchConfig make_launch(const BlockConfig& block, const MatrixSize& matrix);

// Sixteen 1D blocks (64..1024 step 64) followed by (8,8), (16,16), (24,24), (32,32).
const std::vector<BlockConfig>& canonical_blocks();
// 240, 496, 784, 1016, 1232, 1680, 2024 (square).
const std::vector<MatrixSize>& default_matrices();

constexpr long long ceil_div(long long a, long long b) { return (a + b - 1) / b; }

}  // namespace blocktune
