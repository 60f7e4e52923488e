#include "kqf/recipe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "kqf/arch.hpp"

namespace kqf {

using nlohmann::json;

RoleRule RoleRule::make_fixed(Format f) {
    RoleRule r;
    r.kind = Kind::Fixed;
    r.fixed = f;
    return r;
}

RoleRule RoleRule::make_split(std::vector<SplitPart> parts) {
    RoleRule r;
    r.kind = Kind::Split;
    r.split = std::move(parts);
    return r;
}

RoleRule RoleRule::make_dynamic(DynamicRule d) {
    RoleRule r;
    r.kind = Kind::Dynamic;
    r.dynamic = d;
    return r;
}

void QuantRecipe::validate() const {
    if (name.empty()) {
        throw std::invalid_argument("recipe has no name");
    }
    const std::vector<std::string>& known = weight_matrix_roles();
    for (const auto& [role, rule] : roles) {
        if (std::find(known.begin(), known.end(), role) == known.end()) {
            throw std::invalid_argument("unknown role in recipe: " + role);
        }
        if (rule.kind == RoleRule::Kind::Split) {
            if (rule.split.empty()) {
                throw std::invalid_argument("empty split for role " + role);
            }
            double sum = 0.0;
            for (size_t i = 0; i < rule.split.size(); ++i) {
                const SplitPart& p = rule.split[i];
                if (!(p.fraction > 0.0 && p.fraction <= 1.0)) {
                    throw std::invalid_argument(
                        "split fraction out of (0, 1] for role " + role);
                }
                for (size_t j = i + 1; j < rule.split.size(); ++j) {
                    if (rule.split[j].format == p.format) {
                        throw std::invalid_argument(
                            "duplicate format in split for role " + role);
                    }
                }
                sum += p.fraction;
            }
            if (std::fabs(sum - 1.0) > 1e-9) {
                throw std::invalid_argument(
                    "split fractions do not sum to 1 for role " + role);
            }
        }
    }
}

namespace {

json rule_to_json(const RoleRule& rule) {
    switch (rule.kind) {
        case RoleRule::Kind::Fixed:
            return json(format_name(rule.fixed));
        case RoleRule::Kind::Split: {
            json parts = json::array();
            for (const SplitPart& p : rule.split) {
                parts.push_back({{"format", format_name(p.format)},
                                 {"fraction", p.fraction}});
            }
            return json{{"split", parts}};
        }
        case RoleRule::Kind::Dynamic: {
            const DynamicRule& d = rule.dynamic;
            return json{{"dynamic",
                         {{"head", d.head},
                          {"head_format", format_name(d.head_format)},
                          {"stride", d.stride},
                          {"stride_format", format_name(d.stride_format)},
                          {"base_format", format_name(d.base_format)}}}};
        }
    }
    throw std::logic_error("unreachable rule kind");
}

RoleRule rule_from_json(const json& j, const std::string& role) {
    if (j.is_string()) {
        return RoleRule::make_fixed(parse_format(j.get<std::string>()));
    }
    if (j.is_object() && j.contains("split")) {
        std::vector<SplitPart> parts;
        for (const json& pj : j.at("split")) {
            SplitPart p;
            p.format = parse_format(pj.at("format").get<std::string>());
            p.fraction = pj.at("fraction").get<double>();
            parts.push_back(p);
        }
        return RoleRule::make_split(std::move(parts));
    }
    if (j.is_object() && j.contains("dynamic")) {
        const json& dj = j.at("dynamic");
        DynamicRule d;
        d.head = dj.value("head", 0u);
        d.head_format = parse_format(dj.value("head_format", "f32"));
        d.stride = dj.value("stride", 0u);
        d.stride_format = parse_format(dj.value("stride_format", "f32"));
        d.base_format = parse_format(dj.at("base_format").get<std::string>());
        return RoleRule::make_dynamic(d);
    }
    throw std::invalid_argument("unrecognized rule for role " + role);
}

}  // namespace

QuantRecipe QuantRecipe::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("recipe is not valid JSON: ") +
                                    e.what());
    }
    QuantRecipe r;
    if (!j.contains("name")) {
        throw std::invalid_argument("recipe missing name");
    }
    r.name = j.at("name").get<std::string>();
    if (j.contains("default")) {
        r.default_format = parse_format(j.at("default").get<std::string>());
    }
    if (j.contains("roles")) {
        for (const auto& [role, rj] : j.at("roles").items()) {
            r.roles.emplace(role, rule_from_json(rj, role));
        }
    }
    r.validate();
    return r;
}

QuantRecipe QuantRecipe::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open recipe: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string QuantRecipe::to_json() const {
    json j;
    j["name"] = name;
    if (default_format) {
        j["default"] = format_name(*default_format);
    }
    json roles_j = json::object();
    for (const auto& [role, rule] : roles) {
        roles_j[role] = rule_to_json(rule);
    }
    j["roles"] = roles_j;
    return j.dump(2) + "\n";
}

namespace {

QuantRecipe make_recipe(
    std::string name,
    std::initializer_list<std::pair<const char*, RoleRule>> entries) {
    QuantRecipe r;
    r.name = std::move(name);
    r.default_format = Format::F32;
    for (const auto& [role, rule] : entries) {
        r.roles.emplace(role, rule);
    }
    return r;
}

RoleRule fixed(Format f) { return RoleRule::make_fixed(f); }

std::vector<QuantRecipe> build_recipes() {
    std::vector<QuantRecipe> out;

    out.push_back(make_recipe(
        "Q4_K_M",
        {
            {"token_embd", fixed(Format::Q4_K)},
            {"attn_q_a", fixed(Format::Q4_K)},
            {"attn_q_b", fixed(Format::Q4_K)},
            {"attn_kv_a_mqa", fixed(Format::Q4_K)},
            {"attn_kv_b", fixed(Format::Q4_K)},
            {"attn_output", fixed(Format::Q4_K)},
            {"ffn_gate", fixed(Format::Q4_K)},
            {"ffn_up", fixed(Format::Q4_K)},
            {"ffn_down", fixed(Format::Q6_K)},
            {"ffn_gate_exps", fixed(Format::Q4_K)},
            {"ffn_up_exps", fixed(Format::Q4_K)},
            {"ffn_down_exps",
             RoleRule::make_split({{Format::Q4_K, 0.534}, {Format::Q6_K, 0.466}})},
            {"ffn_gate_shexp", fixed(Format::Q4_K)},
            {"ffn_up_shexp", fixed(Format::Q4_K)},
            {"ffn_down_shexp",
             RoleRule::make_split({{Format::Q4_K, 0.534}, {Format::Q6_K, 0.466}})},
            {"output", fixed(Format::Q6_K)},
        }));

    out.push_back(make_recipe(
        "Q3_K_M",
        {
            {"token_embd", fixed(Format::Q3_K)},
            {"attn_q_a", fixed(Format::Q3_K)},
            {"attn_q_b", fixed(Format::Q3_K)},
            {"attn_kv_a_mqa", fixed(Format::Q3_K)},
            {"attn_kv_b", fixed(Format::Q3_K)},
            {"attn_output", fixed(Format::Q4_K)},
            {"ffn_gate", fixed(Format::Q3_K)},
            {"ffn_up", fixed(Format::Q3_K)},
            {"ffn_down", fixed(Format::Q5_K)},
            {"ffn_gate_exps", fixed(Format::Q3_K)},
            {"ffn_up_exps", fixed(Format::Q3_K)},
            {"ffn_down_exps", fixed(Format::Q4_K)},
            {"ffn_gate_shexp", fixed(Format::Q3_K)},
            {"ffn_up_shexp", fixed(Format::Q3_K)},
            {"ffn_down_shexp", fixed(Format::Q4_K)},
            {"output", fixed(Format::Q6_K)},
        }));

    out.push_back(make_recipe(
        "DQ3_K_M",
        {
            {"token_embd", fixed(Format::Q4_K)},
            {"attn_q_a", fixed(Format::Q4_K)},
            {"attn_q_b", fixed(Format::Q4_K)},
            {"attn_kv_a_mqa", fixed(Format::Q6_K)},
            {"attn_kv_b", fixed(Format::Q6_K)},
            {"attn_output", fixed(Format::Q4_K)},
            {"ffn_gate", fixed(Format::Q4_K)},
            {"ffn_up", fixed(Format::Q4_K)},
            {"ffn_down", fixed(Format::Q6_K)},
            {"ffn_gate_exps", fixed(Format::Q3_K)},
            {"ffn_up_exps", fixed(Format::Q3_K)},
            {"ffn_down_exps",
             RoleRule::make_split({{Format::Q3_K, 0.759},
                                   {Format::Q4_K, 0.207},
                                   {Format::Q6_K, 0.034}})},
            {"ffn_gate_shexp", fixed(Format::Q4_K)},
            {"ffn_up_shexp", fixed(Format::Q4_K)},
            {"ffn_down_shexp", fixed(Format::Q6_K)},
            {"output", fixed(Format::Q6_K)},
        }));

    out.push_back(make_recipe(
        "Q2_K_L",
        {
            {"token_embd", fixed(Format::Q4_K)},
            {"attn_q_a", fixed(Format::Q2_K)},
            {"attn_q_b", fixed(Format::Q2_K)},
            {"attn_kv_a_mqa", fixed(Format::Q6_K)},
            {"attn_kv_b", fixed(Format::Q2_K)},
            {"attn_output", fixed(Format::Q3_K)},
            {"ffn_gate", fixed(Format::Q2_K)},
            {"ffn_up", fixed(Format::Q2_K)},
            {"ffn_down", fixed(Format::Q3_K)},
            {"ffn_gate_exps", fixed(Format::Q2_K)},
            {"ffn_up_exps", fixed(Format::Q2_K)},
            {"ffn_down_exps", fixed(Format::Q3_K)},
            {"ffn_gate_shexp", fixed(Format::Q2_K)},
            {"ffn_up_shexp", fixed(Format::Q2_K)},
            {"ffn_down_shexp", fixed(Format::Q3_K)},
            {"output", fixed(Format::Q6_K)},
        }));

    out.push_back(make_recipe(
        "Q2_K_XL",
        {
            {"token_embd", fixed(Format::Q4_K)},
            {"attn_q_a", fixed(Format::Q4_K)},
            {"attn_q_b", fixed(Format::Q4_K)},
            {"attn_kv_a_mqa", fixed(Format::Q6_K)},
            {"attn_kv_b", fixed(Format::Q6_K)},
            {"attn_output", fixed(Format::Q4_K)},
            {"ffn_gate", fixed(Format::Q4_K)},
            {"ffn_up", fixed(Format::Q4_K)},
            {"ffn_down", fixed(Format::Q6_K)},
            {"ffn_gate_exps", fixed(Format::Q2_K)},
            {"ffn_up_exps", fixed(Format::Q2_K)},
            {"ffn_down_exps",
             RoleRule::make_split({{Format::Q2_K, 0.948}, {Format::Q3_K, 0.052}})},
            {"ffn_gate_shexp", fixed(Format::Q4_K)},
            {"ffn_up_shexp", fixed(Format::Q4_K)},
            {"ffn_down_shexp", fixed(Format::Q6_K)},
            {"output", fixed(Format::Q6_K)},
        }));

    for (const QuantRecipe& r : out) {
        r.validate();
    }
    return out;
}

std::string upper(const std::string& s) {
    std::string u;
    u.reserve(s.size());
    for (char c : s) {
        u.push_back(c >= 'a' && c <= 'z' ? char(c - 'a' + 'A') : c);
    }
    return u;
}

}  // namespace

const std::vector<QuantRecipe>& builtin_recipes() {
    static const std::vector<QuantRecipe> recipes = build_recipes();
    return recipes;
}

const QuantRecipe* find_builtin_recipe(const std::string& name) {
    std::string key = upper(name);
    if (key == "UD-Q2_K_XL") {
        key = "Q2_K_XL";
    }
    for (const QuantRecipe& r : builtin_recipes()) {
        if (upper(r.name) == key) {
            return &r;
        }
    }
    return nullptr;
}

std::vector<std::pair<Format, uint32_t>> split_to_counts(
    const std::vector<SplitPart>& parts, uint32_t n) {
    const size_t k = parts.size();
    if (k == 0) {
        throw std::invalid_argument("empty split");
    }
    std::vector<uint32_t> counts(k);
    std::vector<double> remainder(k);
    uint64_t assigned = 0;
    for (size_t i = 0; i < k; ++i) {
        const double quota = parts[i].fraction * n;
        counts[i] = static_cast<uint32_t>(std::floor(quota));
        remainder[i] = quota - counts[i];
        assigned += counts[i];
    }
    uint64_t leftover = n > assigned ? n - assigned : 0;
    std::vector<size_t> order(k);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (remainder[a] != remainder[b]) {
            return remainder[a] > remainder[b];
        }
        const double bpw_a = bits_per_weight(parts[a].format);
        const double bpw_b = bits_per_weight(parts[b].format);
        if (bpw_a != bpw_b) {
            return bpw_a > bpw_b;
        }
        return a < b;
    });
    for (size_t i = 0; i < k && leftover > 0; ++i, --leftover) {
        ++counts[order[i]];
    }
    std::vector<std::pair<Format, uint32_t>> out;
    out.reserve(k);
    for (size_t i = 0; i < k; ++i) {
        out.emplace_back(parts[i].format, counts[i]);
    }
    return out;
}

}  // namespace kqf
