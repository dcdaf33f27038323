#pragma once

#include "blocktune/error.hpp"
#include "blocktune/kernel_extractor.hpp"
#include "blocktune/launch.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blocktune::harness {

using extract::ParamRole;
using extract::ParamSpec;

inline constexpr int kTimedLaunches = 1000;

struct RoleRule {
    std::string pattern;  // lower case; a trailing '*' matches any suffix
    ParamRole role;
};

/// Ordered name-pattern rules; the first match wins and unmatched names fall
/// back to static_one.
class RoleTable {
public:
    RoleTable() = default;
    explicit RoleTable(std::vector<RoleRule> rules) : rules_(std::move(rules)) {}

    static const RoleTable& standard();

    // Role from the first matching rule, nullopt when only the fallback applies.
    std::optional<ParamRole> match(std::string_view name) const;
    ParamRole fallback() const { return ParamRole::static_one; }
    const std::vector<RoleRule>& rules() const { return rules_; }

private:
    std::vector<RoleRule> rules_;
};

// Pointers are buffers; scalars are looked up by name, case-insensitively.
ParamRole infer_role(const ParamSpec& param, const RoleTable& table = RoleTable::standard());

class HarnessError : public Error {
public:
    using Error::Error;
};

// Element type a pointer parameter points at, qualifiers stripped; void
// pointers are sized as bytes.
std::string pointee_type(std::string_view type_text);

// Declaration type for a by-value scalar, or nullopt for types whose layout
// the harness cannot synthesize (structs, vector types, references).
std::optional<std::string> scalar_type(std::string_view type_text);

// Value a scalar of the given role receives.
long long scalar_value(ParamRole role, const MatrixSize& matrix);

/// Emits main.cu for one launch configuration: zeroed device buffers of
/// `elements` elements per pointer, role-driven scalars, one preheat launch,
/// 1000 timed launches between device events, and a single
/// "RUNTIME_MS: <ms>" or "KERNEL_ERROR: <code>" line on stdout.
/// Throws HarnessError for unsupported parameter types.
std::string generate_main(const extract::FunctionDecl& signature, const LaunchConfig& launch,
                          const RoleTable& table = RoleTable::standard());

}  // namespace blocktune::harness
