#pragma once

#include <string>
#include <vector>

#include "kqf/arch.hpp"
#include "kqf/formats.hpp"
#include "kqf/recipe.hpp"

namespace kqf {

struct PlanEntry {
    TensorSpec spec;
    Format format = Format::F32;
    bool fallback_applied = false;
};

struct AllocationPlan {
    std::string recipe_name;
    std::string arch_name;
    std::vector<PlanEntry> entries;

    const PlanEntry* find(const std::string& tensor_name) const;

    std::string to_json() const;
    static AllocationPlan from_json(const std::string& text);
    static AllocationPlan from_json_file(const std::string& path);
};

// Resolves recipe x architecture into one format per tensor:
//   - 1-D tensors (norms, biases) stay F32 regardless of the recipe
//   - fixed entries assign uniformly across the role's layers
//   - split entries assign the highest-precision format to the lowest layer
//     indices, then spread each next format uniformly over what remains
//     (index j of a count-c format lands at remaining[j*|remaining|/c])
//   - dynamic entries honor head/stride/base
//   - block-incompatible rows fall back: q8_0 when the row length is a
//     multiple of 32, else F16, with fallback_applied set
//
// Throws std::runtime_error("unmapped role ...") when neither a role entry
// nor a recipe default covers a tensor.
AllocationPlan plan_allocation(const ModelArch& arch, const QuantRecipe& recipe);

// Same resolution against an explicit tensor list (e.g. the contents of a
// model file) instead of an enumerated architecture.
AllocationPlan plan_for_tensors(const std::vector<TensorSpec>& tensors,
                                const QuantRecipe& recipe,
                                const std::string& arch_name);

}  // namespace kqf
