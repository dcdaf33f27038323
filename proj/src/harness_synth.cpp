#include "blocktune/harness_synth.hpp"

#include "blocktune/lexer.hpp"
#include "blocktune/text.hpp"

#include <set>
#include <sstream>

namespace blocktune::harness {

const RoleTable& RoleTable::standard() {
    static const RoleTable table({
        {"w", ParamRole::width},
        {"width", ParamRole::width},
        {"cols", ParamRole::width},
        {"n_cols", ParamRole::width},
        {"h", ParamRole::height},
        {"height", ParamRole::height},
        {"rows", ParamRole::height},
        {"n_rows", ParamRole::height},
        {"n", ParamRole::size},
        {"size", ParamRole::size},
        {"len", ParamRole::size},
        {"count", ParamRole::size},
        {"num*", ParamRole::size},
        {"k", ParamRole::k_like},
        {"stride", ParamRole::static_one},
        {"inc*", ParamRole::static_one},
        {"offset", ParamRole::static_one},
    });
    return table;
}

std::optional<ParamRole> RoleTable::match(std::string_view name) const {
    auto lower = to_lower(name);
    for (const auto& rule : rules_) {
        std::string_view pat = rule.pattern;
        if (!pat.empty() && pat.back() == '*') {
            if (std::string_view(lower).starts_with(pat.substr(0, pat.size() - 1))) return rule.role;
        } else if (lower == pat) {
            return rule.role;
        }
    }
    return std::nullopt;
}

ParamRole infer_role(const ParamSpec& param, const RoleTable& table) {
    if (param.is_pointer) return ParamRole::buffer;
    return table.match(param.name).value_or(table.fallback());
}

namespace {

const std::set<std::string_view> kDropQualifiers = {
    "const", "volatile", "__restrict__", "__restrict", "restrict", "register",
};

// Type tokens with cv/restrict qualifiers removed.
std::vector<std::string> bare_tokens(std::string_view type_text) {
    std::vector<std::string> out;
    for (const auto& t : lex::tokenize(type_text).tokens) {
        if (t.kind == lex::TokenKind::identifier && kDropQualifiers.contains(t.text)) continue;
        out.emplace_back(t.text);
    }
    return out;
}

std::string glue(const std::vector<std::string>& toks) {
    std::string out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        bool tight = toks[i] == "*" || toks[i] == ":" || (i > 0 && toks[i - 1] == ":") ||
                     toks[i] == "<" || toks[i] == ">" || (i > 0 && toks[i - 1] == "<");
        if (i > 0 && !tight) out += ' ';
        out += toks[i];
    }
    return out;
}

const std::set<std::string> kScalarTypes = {
    "bool", "char", "signed char", "unsigned char", "short", "short int", "unsigned short",
    "unsigned short int", "int", "signed", "signed int", "unsigned", "unsigned int", "long",
    "long int", "unsigned long", "unsigned long int", "long long", "long long int",
    "unsigned long long", "unsigned long long int", "float", "double", "size_t", "std::size_t",
    "ptrdiff_t", "std::ptrdiff_t", "int8_t", "int16_t", "int32_t", "int64_t", "uint8_t",
    "uint16_t", "uint32_t", "uint64_t", "uint", "ulong", "ushort", "uchar",
};

}  // namespace

std::string pointee_type(std::string_view type_text) {
    auto toks = bare_tokens(type_text);
    // Array declarators decay: drop "[...]".
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (toks[i] == "[") {
            toks.resize(i);
            break;
        }
    }
    for (std::size_t i = toks.size(); i-- > 0;) {
        if (toks[i] == "*") {
            toks.erase(toks.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    auto base = glue(toks);
    if (base == "void" || base.empty()) return "unsigned char";
    return base;
}

std::optional<std::string> scalar_type(std::string_view type_text) {
    auto base = glue(bare_tokens(type_text));
    if (kScalarTypes.contains(base)) return base;
    return std::nullopt;
}

long long scalar_value(ParamRole role, const MatrixSize& matrix) {
    switch (role) {
        case ParamRole::width: return matrix.width;
        case ParamRole::height: return matrix.height;
        case ParamRole::size: return matrix.elements();
        case ParamRole::k_like: return matrix.width;
        case ParamRole::buffer:
        case ParamRole::static_one:
        case ParamRole::unknown: return 1;
    }
    return 1;
}

std::string generate_main(const extract::FunctionDecl& signature, const LaunchConfig& launch,
                          const RoleTable& table) {
    const auto& m = launch.matrix;
    const auto& b = launch.block;
    const auto& g = launch.grid;

    std::ostringstream decls;
    std::ostringstream frees;
    std::string args;
    for (std::size_t i = 0; i < signature.params.size(); ++i) {
        const auto& p = signature.params[i];
        auto var = "arg" + std::to_string(i);
        args += (i ? ", " : "") + var;
        auto role = infer_role(p, table);
        if (role == ParamRole::buffer) {
            auto elem = pointee_type(p.type_text);
            decls << "    " << elem << "* " << var << " = nullptr;  // " << (p.name.empty() ? "unnamed" : p.name)
                  << ": buffer\n"
                  << "    cudaMalloc(reinterpret_cast<void**>(&" << var << "), elements * sizeof(" << elem << "));\n"
                  << "    cudaMemset(" << var << ", 0, elements * sizeof(" << elem << "));\n";
            frees << "    cudaFree(" << var << ");\n";
            continue;
        }
        auto type = scalar_type(p.type_text);
        if (!type) {
            throw HarnessError("unsupported parameter type '" + p.type_text + "' for " +
                               (p.name.empty() ? "parameter " + std::to_string(i) : p.name));
        }
        decls << "    " << *type << " " << var << " = static_cast<" << *type << ">(" << scalar_value(role, m)
              << "LL);  // " << (p.name.empty() ? "unnamed" : p.name) << ": " << extract::to_string(role) << "\n";
    }

    auto launch_stmt = signature.name + "<<<grid, block>>>(" + args + ");";
    std::ostringstream os;
    os << "// Timing harness for " << signature.name << ", matrix " << to_string(m) << ", block "
       << to_string(b) << ".\n"
       << "#include <cstdio>\n"
       << "#include <cuda_runtime.h>\n"
       << "\n"
       << "#include \"kernel.cu\"\n"
       << "\n"
       << "int main() {\n"
       << "    const long long elements = " << m.elements() << "LL;\n"
       << "    (void)elements;\n"
       << decls.str()
       << "\n"
       << "    const dim3 grid(" << g.gx << ", " << g.gy << ", " << g.gz << ");\n"
       << "    const dim3 block(" << b.x << ", " << b.y << ", " << b.z << ");\n"
       << "\n"
       << "    // preheat\n"
       << "    " << launch_stmt << "\n"
       << "    cudaDeviceSynchronize();\n"
       << "\n"
       << "    cudaEvent_t start;\n"
       << "    cudaEvent_t stop;\n"
       << "    cudaEventCreate(&start);\n"
       << "    cudaEventCreate(&stop);\n"
       << "    cudaEventRecord(start);\n"
       << "    for (int i = 0; i < " << kTimedLaunches << "; ++i) {\n"
       << "        " << launch_stmt << "\n"
       << "    }\n"
       << "    cudaEventRecord(stop);\n"
       << "    cudaEventSynchronize(stop);\n"
       << "\n"
       << "    cudaError_t err = cudaGetLastError();\n"
       << "    if (err == cudaSuccess) err = cudaDeviceSynchronize();\n"
       << "    if (err != cudaSuccess) {\n"
       << "        std::printf(\"KERNEL_ERROR: %d\\n\", static_cast<int>(err));\n"
       << "        return 1;\n"
       << "    }\n"
       << "    float ms = 0.0f;\n"
       << "    cudaEventElapsedTime(&ms, start, stop);\n"
       << "    std::printf(\"RUNTIME_MS: %.6f\\n\", ms);\n"
       << "\n"
       << "    cudaEventDestroy(start);\n"
       << "    cudaEventDestroy(stop);\n"
       << frees.str()
       << "    return 0;\n"
       << "}\n";
    return os.str();
}

}  // namespace blocktune::harness
