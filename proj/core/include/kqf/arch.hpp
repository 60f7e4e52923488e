#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kqf {

struct TensorSpec {
    std::string name;  // container tensor name, e.g. "blk.7.ffn_down_exps.weight"
    std::string role;  // name with layer prefix and .weight/.bias suffix stripped
    int layer = -1;    // -1 for global tensors
    std::vector<uint64_t> shape;  // row-major; shape.back() is the row length

    uint64_t n_elements() const;
    uint64_t row_length() const { return shape.empty() ? 0 : shape.back(); }
};

// Multi-head-latent-attention MoE transformer family (DeepSeek-V3 shape
// vocabulary). Dimensions come from a JSON config; nothing model-specific is
// hardcoded, so miniature architectures use the same path.
struct ModelArch {
    std::string name;
    uint32_t n_layers = 0;
    uint32_t n_dense_layers = 0;  // leading layers with a dense FFN
    uint64_t hidden_dim = 0;
    uint64_t dense_ffn_dim = 0;
    uint64_t expert_ffn_dim = 0;
    uint32_t n_routed_experts = 0;
    uint32_t n_shared_experts = 0;
    uint64_t vocab_size = 0;
    uint32_t q_lora_rank = 0;
    uint32_t kv_lora_rank = 0;
    uint32_t n_heads = 0;
    uint32_t rope_head_dim = 0;
    uint32_t nope_head_dim = 0;
    uint32_t v_head_dim = 0;

    uint32_t n_moe_layers() const { return n_layers - n_dense_layers; }

    // Every weight tensor with its (role, layer, shape), in container order:
    // token_embd, per-layer attention + FFN tensors, output_norm, output.
    std::vector<TensorSpec> enumerate_tensors() const;

    uint64_t total_params() const;

    void validate() const;  // throws std::invalid_argument on bad dimensions

    static ModelArch from_json(const std::string& text);
    static ModelArch from_json_file(const std::string& path);
    std::string to_json() const;
};

// Role names of the quantizable weight matrices (the recipe row vocabulary).
const std::vector<std::string>& weight_matrix_roles();

// role is derived from a tensor name: "blk.3.ffn_gate_exps.weight" ->
// "ffn_gate_exps", "output.weight" -> "output".
std::string role_from_tensor_name(const std::string& name);
int layer_from_tensor_name(const std::string& name);  // -1 when global

}  // namespace kqf
