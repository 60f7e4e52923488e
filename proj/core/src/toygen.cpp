#include "kqf/toygen.hpp"

#include <cstring>
#include <random>

namespace kqf {

namespace {

// FNV-1a over the seed bytes then the name; fixed so tensor content depends
// only on (seed, name), not generation order
uint64_t tensor_seed(uint64_t seed, const std::string& name) {
    uint64_t h = 1469598103934665603ull;
    for (int i = 0; i < 8; ++i) {
        h = (h ^ ((seed >> (8 * i)) & 0xFF)) * 1099511628211ull;
    }
    for (unsigned char c : name) {
        h = (h ^ c) * 1099511628211ull;
    }
    return h;
}

// mt19937_64 output is fully specified by the standard; mapping the top 53
// bits to [0, 1) avoids std::uniform_real_distribution, whose results are
// implementation-defined
double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Irwin-Hall approximation of a unit Gaussian: sum of 12 uniforms, centered
float gaussian_ish(std::mt19937_64& rng) {
    double s = 0.0;
    for (int i = 0; i < 12; ++i) {
        s += unit_uniform(rng);
    }
    return static_cast<float>(s - 6.0);
}

}  // namespace

ModelArch toy_arch() {
    ModelArch a;
    a.name = "toy-moe";
    // every matrix row length is a multiple of 256 so no format falls back
    a.n_layers = 4;
    a.n_dense_layers = 1;
    a.hidden_dim = 256;
    a.dense_ffn_dim = 512;
    a.expert_ffn_dim = 256;
    a.n_routed_experts = 4;
    a.n_shared_experts = 1;
    a.vocab_size = 256;
    a.q_lora_rank = 256;
    a.kv_lora_rank = 256;
    a.n_heads = 2;
    a.rope_head_dim = 64;
    a.nope_head_dim = 64;
    a.v_head_dim = 128;
    a.validate();
    return a;
}

ContainerFile toy_container(const ModelArch& arch, uint64_t seed) {
    ContainerFile file;
    file.alignment = 32;
    file.set_meta("general.architecture", GgufValue::make_string(arch.name));
    file.set_meta("general.name",
                  GgufValue::make_string(arch.name + " synthetic weights"));
    file.set_meta("general.alignment", GgufValue::make_u32(file.alignment));
    file.set_meta("kqf.toy.seed", GgufValue::make_u64(seed));

    for (const TensorSpec& spec : arch.enumerate_tensors()) {
        TensorEntry t;
        t.name = spec.name;
        t.ne.assign(spec.shape.rbegin(), spec.shape.rend());
        t.format = Format::F32;
        const uint64_t n = spec.n_elements();
        t.data.resize(n * 4);
        std::mt19937_64 rng(tensor_seed(seed, spec.name));
        float* out = reinterpret_cast<float*>(t.data.data());
        for (uint64_t i = 0; i < n; ++i) {
            out[i] = gaussian_ish(rng);
        }
        file.tensors.push_back(std::move(t));
    }
    return file;
}

}  // namespace kqf
