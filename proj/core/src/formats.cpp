#include "kqf/formats.hpp"

#include <array>
#include <stdexcept>

namespace kqf {

namespace {

constexpr std::array<FormatInfo, kNumFormats> kFormatTable = {{
    {Format::F32, "f32", 1, 4, 0, 32, false},
    {Format::F16, "f16", 1, 2, 0, 16, false},
    {Format::Q2_K, "q2_k", 256, 84, 16, 2, true},
    {Format::Q3_K, "q3_k", 256, 110, 16, 3, false},
    {Format::Q4_K, "q4_k", 256, 144, 32, 4, true},
    {Format::Q5_K, "q5_k", 256, 176, 32, 5, true},
    {Format::Q6_K, "q6_k", 256, 210, 16, 6, false},
    {Format::Q8_0, "q8_0", 32, 34, 0, 8, false},
}};

}  // namespace

const FormatInfo& format_info(Format f) {
    return kFormatTable[static_cast<size_t>(f)];
}

double bits_per_weight(Format f) {
    const FormatInfo& info = format_info(f);
    return static_cast<double>(info.block_bytes) * 8.0 / info.block_len;
}

Format parse_format(const std::string& name) {
    std::string lower;
    lower.reserve(name.size());
    for (char c : name) {
        lower.push_back(c >= 'A' && c <= 'Z' ? char(c - 'A' + 'a') : c);
    }
    for (const FormatInfo& info : kFormatTable) {
        if (lower == info.name) {
            return info.id;
        }
    }
    throw std::invalid_argument("unknown format name: " + name);
}

const char* format_name(Format f) { return format_info(f).name; }

bool is_super_block(Format f) { return format_info(f).block_len > 1; }

namespace {

// Container tensor type ids, fixed by the interchange format.
constexpr uint32_t kTypeCodes[kNumFormats] = {
    0,   // f32
    1,   // f16
    10,  // q2_k
    11,  // q3_k
    12,  // q4_k
    13,  // q5_k
    14,  // q6_k
    8,   // q8_0
};

}  // namespace

uint32_t format_type_code(Format f) {
    return kTypeCodes[static_cast<size_t>(f)];
}

Format format_from_type_code(uint32_t code) {
    for (int i = 0; i < kNumFormats; ++i) {
        if (kTypeCodes[i] == code) {
            return static_cast<Format>(i);
        }
    }
    throw std::runtime_error("unsupported tensor type " + std::to_string(code));
}

}  // namespace kqf
