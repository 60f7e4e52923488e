#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kqf/arch.hpp"
#include "kqf/formats.hpp"
#include "kqf/plan.hpp"

namespace kqf {

// Runtime footprint beyond the weights: overhead(ctx) = c0 + c1 * ctx bytes.
// c1 is the per-token compressed-KV-cache term of the architecture,
// n_layers * (kv_lora_rank + rope_head_dim) * 2 bytes; c0 is pinned so that
// overhead at a 32768-token context totals 188 GiB, which reproduces the
// published deployment numbers for the DeepSeek family. Both constants can
// be overridden from a deployment config.
struct OverheadModel {
    double c0 = 0.0;
    double c1 = 0.0;

    static OverheadModel calibrated(const ModelArch& arch);
    uint64_t bytes_at(uint64_t context_len) const;
};

struct DeviceProfile {
    std::string name;
    uint64_t memory_bytes = 0;
    uint32_t devices_per_node = 8;

    // "8x80GB" / "8x64GB" style strings (GB meaning GiB, as in device
    // marketing); also the key format of the JSON inventory.
    static DeviceProfile parse(const std::string& text);
    static std::vector<DeviceProfile> builtin_profiles();
    static std::vector<DeviceProfile> from_json_file(const std::string& path);
};

struct TensorCost {
    std::string name;
    std::string role;
    int layer = -1;
    Format format = Format::F32;
    uint64_t params = 0;
    uint64_t bytes = 0;
};

struct FitVerdict {
    std::string device;
    uint64_t device_memory_bytes = 0;
    bool fits = false;            // per_device_bytes <= memory (inclusive)
    int64_t margin_bytes = 0;     // memory - per_device_bytes, negative when exceeded
};

struct DeploymentReport {
    std::string recipe_name;
    std::string arch_name;
    uint64_t total_params = 0;
    uint64_t weight_bytes = 0;
    double avg_bpw = 0.0;  // weight_bytes * 8 / total_params
    uint64_t context_len = 0;
    uint64_t overhead_bytes = 0;
    uint64_t mu_total_bytes = 0;  // weights + overhead
    uint32_t n_devices = 0;
    uint64_t per_device_bytes = 0;  // ceil(mu_total / n_devices)
    std::vector<TensorCost> tensors;
    std::vector<FitVerdict> fits;

    std::string to_json() const;
    std::string to_table() const;
};

// Encoded byte count of one tensor; the row length must divide into whole
// blocks and the shape must be non-degenerate.
uint64_t tensor_bytes(const TensorSpec& spec, Format fmt);

DeploymentReport report(const AllocationPlan& plan, const ModelArch& arch,
                        uint64_t context_len, const OverheadModel& overhead,
                        const std::vector<DeviceProfile>& devices,
                        uint32_t n_devices);

std::vector<FitVerdict> fit_matrix(const DeploymentReport& rep,
                                   const std::vector<DeviceProfile>& devices);

// Whole GiB values as printed in deployment summaries (ceiling).
uint64_t ceil_gib(uint64_t bytes);

}  // namespace kqf
