#include "kqf/arch.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace kqf {

using nlohmann::json;

uint64_t TensorSpec::n_elements() const {
    uint64_t n = shape.empty() ? 0 : 1;
    for (uint64_t d : shape) {
        n *= d;
    }
    return n;
}

namespace {

std::string blk_name(uint32_t layer, const char* role, const char* suffix) {
    return "blk." + std::to_string(layer) + "." + role + "." + suffix;
}

TensorSpec make_spec(std::string name, std::string role, int layer,
                     std::vector<uint64_t> shape) {
    TensorSpec s;
    s.name = std::move(name);
    s.role = std::move(role);
    s.layer = layer;
    s.shape = std::move(shape);
    return s;
}

}  // namespace

std::vector<TensorSpec> ModelArch::enumerate_tensors() const {
    validate();
    std::vector<TensorSpec> out;
    const uint64_t qk_rope = rope_head_dim;
    const uint64_t q_out = static_cast<uint64_t>(n_heads) * (nope_head_dim + qk_rope);
    const uint64_t kv_b_out = static_cast<uint64_t>(n_heads) * (nope_head_dim + v_head_dim);
    const uint64_t attn_out_in = static_cast<uint64_t>(n_heads) * v_head_dim;
    const uint64_t shexp_ffn = static_cast<uint64_t>(n_shared_experts) * expert_ffn_dim;

    out.push_back(make_spec("token_embd.weight", "token_embd", -1,
                            {vocab_size, hidden_dim}));
    for (uint32_t i = 0; i < n_layers; ++i) {
        const int layer = static_cast<int>(i);
        out.push_back(make_spec(blk_name(i, "attn_norm", "weight"), "attn_norm",
                                layer, {hidden_dim}));
        out.push_back(make_spec(blk_name(i, "attn_q_a_norm", "weight"),
                                "attn_q_a_norm", layer, {q_lora_rank}));
        out.push_back(make_spec(blk_name(i, "attn_kv_a_norm", "weight"),
                                "attn_kv_a_norm", layer, {kv_lora_rank}));
        out.push_back(make_spec(blk_name(i, "attn_q_a", "weight"), "attn_q_a",
                                layer, {q_lora_rank, hidden_dim}));
        out.push_back(make_spec(blk_name(i, "attn_q_b", "weight"), "attn_q_b",
                                layer, {q_out, q_lora_rank}));
        out.push_back(make_spec(blk_name(i, "attn_kv_a_mqa", "weight"),
                                "attn_kv_a_mqa", layer,
                                {kv_lora_rank + qk_rope, hidden_dim}));
        out.push_back(make_spec(blk_name(i, "attn_kv_b", "weight"), "attn_kv_b",
                                layer, {kv_b_out, kv_lora_rank}));
        out.push_back(make_spec(blk_name(i, "attn_output", "weight"),
                                "attn_output", layer,
                                {hidden_dim, attn_out_in}));
        out.push_back(make_spec(blk_name(i, "ffn_norm", "weight"), "ffn_norm",
                                layer, {hidden_dim}));
        if (i < n_dense_layers) {
            out.push_back(make_spec(blk_name(i, "ffn_gate", "weight"),
                                    "ffn_gate", layer,
                                    {dense_ffn_dim, hidden_dim}));
            out.push_back(make_spec(blk_name(i, "ffn_up", "weight"), "ffn_up",
                                    layer, {dense_ffn_dim, hidden_dim}));
            out.push_back(make_spec(blk_name(i, "ffn_down", "weight"),
                                    "ffn_down", layer,
                                    {hidden_dim, dense_ffn_dim}));
        } else {
            out.push_back(make_spec(blk_name(i, "ffn_gate_inp", "weight"),
                                    "ffn_gate_inp", layer,
                                    {n_routed_experts, hidden_dim}));
            out.push_back(make_spec(blk_name(i, "exp_probs_b", "bias"),
                                    "exp_probs_b", layer, {n_routed_experts}));
            out.push_back(make_spec(blk_name(i, "ffn_gate_exps", "weight"),
                                    "ffn_gate_exps", layer,
                                    {n_routed_experts, expert_ffn_dim,
                                     hidden_dim}));
            out.push_back(make_spec(blk_name(i, "ffn_down_exps", "weight"),
                                    "ffn_down_exps", layer,
                                    {n_routed_experts, hidden_dim,
                                     expert_ffn_dim}));
            out.push_back(make_spec(blk_name(i, "ffn_up_exps", "weight"),
                                    "ffn_up_exps", layer,
                                    {n_routed_experts, expert_ffn_dim,
                                     hidden_dim}));
            out.push_back(make_spec(blk_name(i, "ffn_gate_shexp", "weight"),
                                    "ffn_gate_shexp", layer,
                                    {shexp_ffn, hidden_dim}));
            out.push_back(make_spec(blk_name(i, "ffn_down_shexp", "weight"),
                                    "ffn_down_shexp", layer,
                                    {hidden_dim, shexp_ffn}));
            out.push_back(make_spec(blk_name(i, "ffn_up_shexp", "weight"),
                                    "ffn_up_shexp", layer,
                                    {shexp_ffn, hidden_dim}));
        }
    }
    out.push_back(make_spec("output_norm.weight", "output_norm", -1,
                            {hidden_dim}));
    out.push_back(make_spec("output.weight", "output", -1,
                            {vocab_size, hidden_dim}));
    return out;
}

uint64_t ModelArch::total_params() const {
    uint64_t total = 0;
    for (const TensorSpec& t : enumerate_tensors()) {
        total += t.n_elements();
    }
    return total;
}

void ModelArch::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw std::invalid_argument(std::string("bad architecture: ") +
                                        what);
        }
    };
    require(n_layers >= 1, "n_layers must be >= 1");
    require(n_dense_layers <= n_layers, "n_dense_layers exceeds n_layers");
    require(hidden_dim > 0, "hidden_dim must be > 0");
    require(vocab_size > 0, "vocab_size must be > 0");
    require(n_heads > 0, "n_heads must be > 0");
    require(q_lora_rank > 0, "q_lora_rank must be > 0");
    require(kv_lora_rank > 0, "kv_lora_rank must be > 0");
    require(rope_head_dim > 0, "rope_head_dim must be > 0");
    require(nope_head_dim > 0, "nope_head_dim must be > 0");
    require(v_head_dim > 0, "v_head_dim must be > 0");
    require(n_dense_layers == 0 || dense_ffn_dim > 0,
            "dense_ffn_dim must be > 0 when dense layers exist");
    if (n_dense_layers < n_layers) {
        require(expert_ffn_dim > 0, "expert_ffn_dim must be > 0");
        require(n_routed_experts > 0, "n_routed_experts must be > 0");
        require(n_shared_experts > 0, "n_shared_experts must be > 0");
    }
}

namespace {

template <typename T>
T get_field(const json& j, const char* key) {
    if (!j.contains(key)) {
        throw std::invalid_argument(std::string("arch config missing key: ") +
                                    key);
    }
    return j.at(key).get<T>();
}

}  // namespace

ModelArch ModelArch::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("arch config is not valid JSON: ") +
                                    e.what());
    }
    ModelArch a;
    a.name = get_field<std::string>(j, "name");
    a.n_layers = get_field<uint32_t>(j, "n_layers");
    a.n_dense_layers = get_field<uint32_t>(j, "n_dense_layers");
    a.hidden_dim = get_field<uint64_t>(j, "hidden_dim");
    a.dense_ffn_dim = get_field<uint64_t>(j, "dense_ffn_dim");
    a.expert_ffn_dim = get_field<uint64_t>(j, "expert_ffn_dim");
    a.n_routed_experts = get_field<uint32_t>(j, "n_routed_experts");
    a.n_shared_experts = get_field<uint32_t>(j, "n_shared_experts");
    a.vocab_size = get_field<uint64_t>(j, "vocab_size");
    a.q_lora_rank = get_field<uint32_t>(j, "q_lora_rank");
    a.kv_lora_rank = get_field<uint32_t>(j, "kv_lora_rank");
    a.n_heads = get_field<uint32_t>(j, "n_heads");
    a.rope_head_dim = get_field<uint32_t>(j, "rope_head_dim");
    a.nope_head_dim = get_field<uint32_t>(j, "nope_head_dim");
    a.v_head_dim = get_field<uint32_t>(j, "v_head_dim");
    a.validate();
    return a;
}

ModelArch ModelArch::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open arch config: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string ModelArch::to_json() const {
    json j;
    j["name"] = name;
    j["n_layers"] = n_layers;
    j["n_dense_layers"] = n_dense_layers;
    j["hidden_dim"] = hidden_dim;
    j["dense_ffn_dim"] = dense_ffn_dim;
    j["expert_ffn_dim"] = expert_ffn_dim;
    j["n_routed_experts"] = n_routed_experts;
    j["n_shared_experts"] = n_shared_experts;
    j["vocab_size"] = vocab_size;
    j["q_lora_rank"] = q_lora_rank;
    j["kv_lora_rank"] = kv_lora_rank;
    j["n_heads"] = n_heads;
    j["rope_head_dim"] = rope_head_dim;
    j["nope_head_dim"] = nope_head_dim;
    j["v_head_dim"] = v_head_dim;
    return j.dump(2) + "\n";
}

const std::vector<std::string>& weight_matrix_roles() {
    static const std::vector<std::string> roles = {
        "token_embd",    "attn_q_a",       "attn_q_b",
        "attn_kv_a_mqa", "attn_kv_b",      "attn_output",
        "ffn_gate",      "ffn_up",         "ffn_down",
        "ffn_gate_inp",  "ffn_gate_exps",  "ffn_down_exps",
        "ffn_up_exps",   "ffn_gate_shexp", "ffn_down_shexp",
        "ffn_up_shexp",  "output",
    };
    return roles;
}

std::string role_from_tensor_name(const std::string& name) {
    std::string s = name;
    if (s.rfind("blk.", 0) == 0) {
        const size_t dot = s.find('.', 4);
        if (dot != std::string::npos) {
            s = s.substr(dot + 1);
        }
    }
    for (const char* suffix : {".weight", ".bias"}) {
        const size_t len = std::string(suffix).size();
        if (s.size() > len && s.compare(s.size() - len, len, suffix) == 0) {
            s.resize(s.size() - len);
            break;
        }
    }
    return s;
}

int layer_from_tensor_name(const std::string& name) {
    if (name.rfind("blk.", 0) != 0) {
        return -1;
    }
    const size_t dot = name.find('.', 4);
    if (dot == std::string::npos || dot == 4) {
        return -1;
    }
    int layer = 0;
    for (size_t i = 4; i < dot; ++i) {
        if (name[i] < '0' || name[i] > '9') {
            return -1;
        }
        layer = layer * 10 + (name[i] - '0');
    }
    return layer;
}

}  // namespace kqf
