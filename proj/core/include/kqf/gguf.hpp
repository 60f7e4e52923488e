#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kqf/formats.hpp"

namespace kqf {

// Wire-level metadata value types (v3 container).
enum class GgufType : int32_t {
    U8 = 0,
    I8 = 1,
    U16 = 2,
    I16 = 3,
    U32 = 4,
    I32 = 5,
    F32 = 6,
    BOOL = 7,
    STRING = 8,
    ARRAY = 9,
    U64 = 10,
    I64 = 11,
    F64 = 12,
};

const char* gguf_type_name(GgufType t);

// One metadata value. Integer widths collapse into u64/i64 storage; the wire
// type is kept so a read-then-write round trip is byte identical.
struct GgufValue {
    GgufType type = GgufType::U8;
    GgufType elem_type = GgufType::U8;  // meaningful only when type == ARRAY

    std::variant<uint64_t, int64_t, double, bool, std::string,
                 std::vector<GgufValue>>
        data;

    static GgufValue make_u32(uint32_t v);
    static GgufValue make_u64(uint64_t v);
    static GgufValue make_i32(int32_t v);
    static GgufValue make_f32(float v);
    static GgufValue make_bool(bool v);
    static GgufValue make_string(std::string v);

    uint64_t as_uint() const;
    int64_t as_int() const;
    double as_float() const;
    bool as_bool() const;
    const std::string& as_string() const;
    const std::vector<GgufValue>& as_array() const;
};

struct TensorEntry {
    std::string name;
    std::vector<uint64_t> ne;  // ne[0] is the row length
    Format format = Format::F32;
    uint64_t offset = 0;  // relative to the aligned data section
    std::vector<uint8_t> data;

    uint64_t n_elements() const;
    uint64_t row_length() const { return ne.empty() ? 0 : ne[0]; }
    uint64_t byte_size() const;  // size implied by ne and format
};

// In-memory model file. Metadata keeps file order so writes are canonical.
struct ContainerFile {
    uint32_t version = 3;
    uint32_t alignment = 32;
    uint64_t data_offset = 0;  // set by the reader: start of the data section
    std::vector<std::pair<std::string, GgufValue>> metadata;
    std::vector<TensorEntry> tensors;

    const GgufValue* find_meta(const std::string& key) const;
    GgufValue* find_meta(const std::string& key);
    void set_meta(const std::string& key, GgufValue v);
    const TensorEntry* find_tensor(const std::string& name) const;
};

// Reads a container file. Throws std::runtime_error with a diagnostic naming
// the failure: bad magic, unsupported version, truncated header or payload,
// misaligned tensor offset, unknown value or tensor type.
ContainerFile read_container(const std::string& path);
ContainerFile read_container_bytes(const std::vector<uint8_t>& bytes);

// Writes canonically: offsets recomputed in tensor order, each aligned up to
// the container alignment, no padding after the final tensor.
void write_container(const ContainerFile& file, const std::string& path);
std::vector<uint8_t> write_container_bytes(const ContainerFile& file);

}  // namespace kqf
