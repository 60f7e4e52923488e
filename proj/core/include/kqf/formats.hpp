#pragma once

#include <cstdint>
#include <string>

namespace kqf {

enum class Format : uint8_t {
    F32,
    F16,
    Q2_K,
    Q3_K,
    Q4_K,
    Q5_K,
    Q6_K,
    Q8_0,
};

inline constexpr int kNumFormats = 8;

struct FormatInfo {
    Format id;
    const char* name;       // lowercase, e.g. "q4_k"
    uint32_t block_len;     // elements per encoded block
    uint32_t block_bytes;   // bytes per encoded block
    uint32_t sub_block_len; // elements per sub-block, 0 when not super-block
    uint32_t quant_bits;    // bits per stored quant
    bool asymmetric;        // carries per-sub-block mins
};

const FormatInfo& format_info(Format f);

// exact value: block_bytes * 8 / block_len
double bits_per_weight(Format f);

// parses "q4_k", "Q4_K", "f16", ...; throws std::invalid_argument on unknown names
Format parse_format(const std::string& name);
const char* format_name(Format f);

bool is_super_block(Format f);  // true for the six block-quantized formats

// GGUF tensor type id <-> Format. Unknown incoming ids throw
// std::runtime_error("unsupported tensor type ...").
uint32_t format_type_code(Format f);
Format format_from_type_code(uint32_t code);

}  // namespace kqf
