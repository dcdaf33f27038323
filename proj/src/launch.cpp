#include "blocktune/launch.hpp"

#include "blocktune/error.hpp"
#include "blocktune/text.hpp"

#include <algorithm>

namespace blocktune {

BlockConfig make_block(int x, int y, int z) {
    BlockConfig b{x, y, z};
    if (!b.valid()) {
        throw ContractViolation("illegal thread block " + to_string(b) +
                                ": needs 1..1024 threads in whole warps");
    }
    return b;
}

BlockConfig parse_block(std::string_view text) {
    auto parts = split(trim(text), 'x');
    if (parts.empty() || parts.size() > 3) {
        throw ContractViolation("malformed block '" + std::string(text) + "'");
    }
    int dims[3] = {1, 1, 1};
    for (std::size_t i = 0; i < parts.size(); ++i) {
        auto v = parse_int(parts[i]);
        if (!v) throw ContractViolation("malformed block '" + std::string(text) + "'");
        dims[i] = *v;
    }
    return make_block(dims[0], dims[1], dims[2]);
}

std::string to_string(const BlockConfig& b) {
    return std::to_string(b.x) + "x" + std::to_string(b.y) + "x" + std::to_string(b.z);
}

MatrixSize make_matrix(int width, int height) {
    if (width < 1 || height < 1) {
        throw ContractViolation("matrix dimensions must be positive");
    }
    return {width, height};
}

MatrixSize parse_matrix(std::string_view text) {
    auto parts = split(trim(text), 'x');
    if (parts.empty() || parts.size() > 2) {
        throw ContractViolation("malformed matrix size '" + std::string(text) + "'");
    }
    auto w = parse_int(parts[0]);
    auto h = parts.size() == 2 ? parse_int(parts[1]) : w;
    if (!w || !h) throw ContractViolation("malformed matrix size '" + std::string(text) + "'");
    return make_matrix(*w, *h);
}

std::string to_string(const MatrixSize& m) {
    return std::to_string(m.width) + "x" + std::to_string(m.height);
}

Grid compute_grid(const BlockConfig& block, const MatrixSize& matrix) {
    Grid g;
    if (block.is_1d()) {
        g.gx = ceil_div(matrix.elements(), block.x);
    } else {
        g.gx = ceil_div(matrix.width, block.x);
        g.gy = ceil_div(matrix.height, block.y);
    }
    g.gx = std::max(g.gx, 1LL);
    g.gy = std::max(g.gy, 1LL);
    return g;
}

LaunchConfig make_launch(const BlockConfig& block, const MatrixSize& matrix) {
    return {block, compute_grid(block, matrix), matrix};
}

const std::vector<BlockConfig>& canonical_blocks() {
    static const std::vector<BlockConfig> blocks = [] {
        std::vector<BlockConfig> out;
        for (int x = 64; x <= kMaxThreadsPerBlock; x += 64) out.push_back(make_block(x));
        for (int side : {8, 16, 24, 32}) out.push_back(make_block(side, side));
        return out;
    }();
    return blocks;
}

const std::vector<MatrixSize>& default_matrices() {
    static const std::vector<MatrixSize> matrices = {
        {240, 240}, {496, 496}, {784, 784}, {1016, 1016}, {1232, 1232}, {1680, 1680}, {2024, 2024},
    };
    return matrices;
}

}  // namespace blocktune
