#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kqf/formats.hpp"

namespace kqf {

struct SplitPart {
    Format format;
    double fraction;  // in (0, 1]; parts sum to 1 within 1e-9
};

// Per-layer rule for a role: the head_count lowest layers get head_format,
// every stride-th of the remaining layers gets stride_format, the rest get
// base_format.
struct DynamicRule {
    uint32_t head = 0;
    Format head_format = Format::F32;
    uint32_t stride = 0;  // 0 disables the stride term
    Format stride_format = Format::F32;
    Format base_format = Format::F32;
};

struct RoleRule {
    enum class Kind { Fixed, Split, Dynamic } kind = Kind::Fixed;
    Format fixed = Format::F32;
    std::vector<SplitPart> split;
    DynamicRule dynamic;

    static RoleRule make_fixed(Format f);
    static RoleRule make_split(std::vector<SplitPart> parts);
    static RoleRule make_dynamic(DynamicRule d);
};

struct QuantRecipe {
    std::string name;
    std::optional<Format> default_format;
    std::map<std::string, RoleRule> roles;

    void validate() const;  // fraction sums, recognised roles

    static QuantRecipe from_json(const std::string& text);
    static QuantRecipe from_json_file(const std::string& path);
    std::string to_json() const;
};

// The five built-in mixed-precision recipes: Q4_K_M, Q3_K_M, DQ3_K_M,
// Q2_K_L, Q2_K_XL.
const std::vector<QuantRecipe>& builtin_recipes();

// Case-insensitive lookup; "UD-Q2_K_XL" is accepted as an alias for
// Q2_K_XL. Returns nullptr when unknown.
const QuantRecipe* find_builtin_recipe(const std::string& name);

// Largest-remainder apportionment of n layer instances across the split
// parts; ties go to the higher-precision (more bits per weight) format.
// Returned in input order; counts sum to n and each differs from
// fraction*n by less than 1.
std::vector<std::pair<Format, uint32_t>> split_to_counts(
    const std::vector<SplitPart>& parts, uint32_t n);

}  // namespace kqf
