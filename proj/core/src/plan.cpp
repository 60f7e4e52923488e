#include "kqf/plan.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace kqf {

using nlohmann::json;

const PlanEntry* AllocationPlan::find(const std::string& tensor_name) const {
    for (const PlanEntry& e : entries) {
        if (e.spec.name == tensor_name) {
            return &e;
        }
    }
    return nullptr;
}

namespace {

// A block format whose block length does not divide the row falls back to
// the widest applicable block encoding, then to raw half floats.
Format apply_fallback(Format fmt, uint64_t row, bool& fell_back) {
    fell_back = false;
    const uint32_t block = format_info(fmt).block_len;
    if (block <= 1 || row % block == 0) {
        return fmt;
    }
    fell_back = true;
    if (row % format_info(Format::Q8_0).block_len == 0) {
        return Format::Q8_0;
    }
    return Format::F16;
}

// Spreads `count` picks over `remaining` slots: pick j lands at index
// floor(j * |remaining| / count).
std::vector<size_t> spread_positions(const std::vector<size_t>& remaining,
                                     uint32_t count) {
    std::vector<size_t> picked;
    picked.reserve(count);
    const size_t r = remaining.size();
    for (uint32_t j = 0; j < count; ++j) {
        picked.push_back(remaining[static_cast<size_t>(j) * r / count]);
    }
    return picked;
}

void assign_split(const std::vector<SplitPart>& parts,
                  const std::vector<size_t>& instance_entries,
                  std::vector<Format>& formats) {
    const uint32_t n = static_cast<uint32_t>(instance_entries.size());
    auto counts = split_to_counts(parts, n);
    // resolve from highest precision down: prefix first, then spread,
    // the last format fills whatever remains
    std::stable_sort(counts.begin(), counts.end(),
                     [](const auto& a, const auto& b) {
                         return bits_per_weight(a.first) > bits_per_weight(b.first);
                     });
    std::vector<size_t> remaining(n);
    for (size_t i = 0; i < n; ++i) {
        remaining[i] = i;
    }
    for (size_t k = 0; k < counts.size(); ++k) {
        const auto& [fmt, count] = counts[k];
        if (count == 0) {
            continue;
        }
        std::vector<size_t> picked;
        if (k == 0) {
            picked.assign(remaining.begin(), remaining.begin() + count);
        } else if (k + 1 == counts.size()) {
            picked = remaining;
        } else {
            picked = spread_positions(remaining, count);
        }
        for (size_t pos : picked) {
            formats[instance_entries[pos]] = fmt;
        }
        std::vector<size_t> next;
        next.reserve(remaining.size() - picked.size());
        for (size_t pos : remaining) {
            if (std::find(picked.begin(), picked.end(), pos) == picked.end()) {
                next.push_back(pos);
            }
        }
        remaining = std::move(next);
    }
}

void assign_dynamic(const DynamicRule& rule,
                    const std::vector<size_t>& instance_entries,
                    std::vector<Format>& formats) {
    for (size_t j = 0; j < instance_entries.size(); ++j) {
        Format fmt;
        if (j < rule.head) {
            fmt = rule.head_format;
        } else if (rule.stride > 0 && (j - rule.head + 1) % rule.stride == 0) {
            fmt = rule.stride_format;
        } else {
            fmt = rule.base_format;
        }
        formats[instance_entries[j]] = fmt;
    }
}

}  // namespace

AllocationPlan plan_for_tensors(const std::vector<TensorSpec>& tensors,
                                const QuantRecipe& recipe,
                                const std::string& arch_name) {
    recipe.validate();
    AllocationPlan plan;
    plan.recipe_name = recipe.name;
    plan.arch_name = arch_name;

    std::vector<Format> formats(tensors.size(), Format::F32);
    std::vector<bool> needs_rule(tensors.size(), false);
    // role -> entry indices, in input (layer) order
    std::map<std::string, std::vector<size_t>> role_instances;
    for (size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].shape.size() <= 1) {
            continue;  // 1-D tensors stay f32 regardless of the recipe
        }
        needs_rule[i] = true;
        role_instances[tensors[i].role].push_back(i);
    }

    for (const auto& [role, instances] : role_instances) {
        const auto it = recipe.roles.find(role);
        if (it == recipe.roles.end()) {
            if (!recipe.default_format) {
                throw std::runtime_error("unmapped role " + role +
                                         " (no recipe entry or default)");
            }
            for (size_t idx : instances) {
                formats[idx] = *recipe.default_format;
            }
            continue;
        }
        const RoleRule& rule = it->second;
        switch (rule.kind) {
            case RoleRule::Kind::Fixed:
                for (size_t idx : instances) {
                    formats[idx] = rule.fixed;
                }
                break;
            case RoleRule::Kind::Split:
                assign_split(rule.split, instances, formats);
                break;
            case RoleRule::Kind::Dynamic:
                assign_dynamic(rule.dynamic, instances, formats);
                break;
        }
    }

    plan.entries.reserve(tensors.size());
    for (size_t i = 0; i < tensors.size(); ++i) {
        PlanEntry e;
        e.spec = tensors[i];
        if (needs_rule[i]) {
            e.format = apply_fallback(formats[i], tensors[i].row_length(),
                                      e.fallback_applied);
        } else {
            e.format = Format::F32;
        }
        plan.entries.push_back(std::move(e));
    }
    return plan;
}

AllocationPlan plan_allocation(const ModelArch& arch,
                               const QuantRecipe& recipe) {
    return plan_for_tensors(arch.enumerate_tensors(), recipe, arch.name);
}

std::string AllocationPlan::to_json() const {
    json j;
    j["recipe"] = recipe_name;
    j["arch"] = arch_name;
    json tensors = json::array();
    for (const PlanEntry& e : entries) {
        json t;
        t["name"] = e.spec.name;
        t["role"] = e.spec.role;
        t["layer"] = e.spec.layer;
        t["shape"] = e.spec.shape;
        t["format"] = format_name(e.format);
        t["fallback"] = e.fallback_applied;
        tensors.push_back(std::move(t));
    }
    j["tensors"] = std::move(tensors);
    return j.dump(2) + "\n";
}

AllocationPlan AllocationPlan::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("plan is not valid JSON: ") +
                                    e.what());
    }
    AllocationPlan plan;
    plan.recipe_name = j.value("recipe", "");
    plan.arch_name = j.value("arch", "");
    if (!j.contains("tensors")) {
        throw std::invalid_argument("plan missing tensors array");
    }
    for (const json& t : j.at("tensors")) {
        PlanEntry e;
        e.spec.name = t.at("name").get<std::string>();
        e.spec.role = t.value("role", role_from_tensor_name(e.spec.name));
        e.spec.layer = t.value("layer", layer_from_tensor_name(e.spec.name));
        e.spec.shape = t.at("shape").get<std::vector<uint64_t>>();
        e.format = parse_format(t.at("format").get<std::string>());
        e.fallback_applied = t.value("fallback", false);
        plan.entries.push_back(std::move(e));
    }
    return plan;
}

AllocationPlan AllocationPlan::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open plan: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

}  // namespace kqf
