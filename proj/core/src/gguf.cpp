#include "kqf/gguf.hpp"

#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

namespace kqf {

namespace {

constexpr uint32_t kMagic = 0x46554747;  // "GGUF" little-endian
constexpr uint32_t kSupportedVersion = 3;
constexpr uint32_t kMaxDims = 4;
constexpr uint32_t kDefaultAlignment = 32;

uint64_t align_up(uint64_t v, uint64_t a) { return (v + a - 1) / a * a; }

[[noreturn]] void fail_truncated(const std::string& what) {
    throw std::runtime_error("truncated file: " + what);
}

struct reader {
    const uint8_t* data;
    size_t size;
    size_t off = 0;

    size_t remaining() const { return size - off; }

    const uint8_t* take(size_t n, const char* what) {
        if (n > remaining()) {
            fail_truncated(what);
        }
        const uint8_t* p = data + off;
        off += n;
        return p;
    }

    template <typename T>
    T scalar(const char* what) {
        T v;
        std::memcpy(&v, take(sizeof(T), what), sizeof(T));
        return v;
    }

    std::string string() {
        const uint64_t len = scalar<uint64_t>("string length");
        if (len > remaining()) {
            fail_truncated("string payload");
        }
        const uint8_t* p = take(static_cast<size_t>(len), "string payload");
        return std::string(reinterpret_cast<const char*>(p),
                           static_cast<size_t>(len));
    }
};

bool valid_type(int32_t t) {
    return t >= 0 && t <= static_cast<int32_t>(GgufType::F64);
}

GgufValue read_value(reader& r, GgufType type, int depth) {
    if (depth > 4) {
        throw std::runtime_error("metadata arrays nested too deeply");
    }
    GgufValue v;
    v.type = type;
    switch (type) {
        case GgufType::U8:
            v.data = static_cast<uint64_t>(r.scalar<uint8_t>("u8 value"));
            break;
        case GgufType::I8:
            v.data = static_cast<int64_t>(r.scalar<int8_t>("i8 value"));
            break;
        case GgufType::U16:
            v.data = static_cast<uint64_t>(r.scalar<uint16_t>("u16 value"));
            break;
        case GgufType::I16:
            v.data = static_cast<int64_t>(r.scalar<int16_t>("i16 value"));
            break;
        case GgufType::U32:
            v.data = static_cast<uint64_t>(r.scalar<uint32_t>("u32 value"));
            break;
        case GgufType::I32:
            v.data = static_cast<int64_t>(r.scalar<int32_t>("i32 value"));
            break;
        case GgufType::U64:
            v.data = r.scalar<uint64_t>("u64 value");
            break;
        case GgufType::I64:
            v.data = r.scalar<int64_t>("i64 value");
            break;
        case GgufType::F32:
            v.data = static_cast<double>(r.scalar<float>("f32 value"));
            break;
        case GgufType::F64:
            v.data = r.scalar<double>("f64 value");
            break;
        case GgufType::BOOL: {
            const uint8_t b = r.scalar<uint8_t>("bool value");
            if (b > 1) {
                throw std::runtime_error("invalid bool value " +
                                         std::to_string(b));
            }
            v.data = b != 0;
            break;
        }
        case GgufType::STRING:
            v.data = r.string();
            break;
        case GgufType::ARRAY: {
            const int32_t raw_elem = r.scalar<int32_t>("array element type");
            if (!valid_type(raw_elem)) {
                throw std::runtime_error("unknown metadata value type " +
                                         std::to_string(raw_elem));
            }
            const GgufType elem = static_cast<GgufType>(raw_elem);
            const uint64_t count = r.scalar<uint64_t>("array length");
            if (count > r.remaining()) {
                fail_truncated("array payload");  // every element needs >= 1 byte
            }
            v.elem_type = elem;
            std::vector<GgufValue> items;
            items.reserve(static_cast<size_t>(count));
            for (uint64_t i = 0; i < count; ++i) {
                items.push_back(read_value(r, elem, depth + 1));
            }
            v.data = std::move(items);
            break;
        }
        default:
            throw std::runtime_error("unknown metadata value type " +
                                     std::to_string(static_cast<int32_t>(type)));
    }
    return v;
}

void write_bytes(std::vector<uint8_t>& out, const void* p, size_t n) {
    const uint8_t* b = static_cast<const uint8_t*>(p);
    out.insert(out.end(), b, b + n);
}

template <typename T>
void write_scalar(std::vector<uint8_t>& out, T v) {
    write_bytes(out, &v, sizeof(T));
}

void write_string(std::vector<uint8_t>& out, const std::string& s) {
    write_scalar<uint64_t>(out, s.size());
    write_bytes(out, s.data(), s.size());
}

void write_value(std::vector<uint8_t>& out, const GgufValue& v) {
    switch (v.type) {
        case GgufType::U8:
            write_scalar<uint8_t>(out, static_cast<uint8_t>(v.as_uint()));
            break;
        case GgufType::I8:
            write_scalar<int8_t>(out, static_cast<int8_t>(v.as_int()));
            break;
        case GgufType::U16:
            write_scalar<uint16_t>(out, static_cast<uint16_t>(v.as_uint()));
            break;
        case GgufType::I16:
            write_scalar<int16_t>(out, static_cast<int16_t>(v.as_int()));
            break;
        case GgufType::U32:
            write_scalar<uint32_t>(out, static_cast<uint32_t>(v.as_uint()));
            break;
        case GgufType::I32:
            write_scalar<int32_t>(out, static_cast<int32_t>(v.as_int()));
            break;
        case GgufType::U64:
            write_scalar<uint64_t>(out, v.as_uint());
            break;
        case GgufType::I64:
            write_scalar<int64_t>(out, v.as_int());
            break;
        case GgufType::F32:
            write_scalar<float>(out, static_cast<float>(v.as_float()));
            break;
        case GgufType::F64:
            write_scalar<double>(out, v.as_float());
            break;
        case GgufType::BOOL:
            write_scalar<uint8_t>(out, v.as_bool() ? 1 : 0);
            break;
        case GgufType::STRING:
            write_string(out, v.as_string());
            break;
        case GgufType::ARRAY: {
            const auto& items = v.as_array();
            write_scalar<int32_t>(out, static_cast<int32_t>(v.elem_type));
            write_scalar<uint64_t>(out, items.size());
            for (const GgufValue& item : items) {
                if (item.type != v.elem_type) {
                    throw std::runtime_error(
                        "array element type mismatch while writing");
                }
                write_value(out, item);
            }
            break;
        }
        default:
            throw std::runtime_error("unknown metadata value type while writing");
    }
}

}  // namespace

const char* gguf_type_name(GgufType t) {
    switch (t) {
        case GgufType::U8: return "u8";
        case GgufType::I8: return "i8";
        case GgufType::U16: return "u16";
        case GgufType::I16: return "i16";
        case GgufType::U32: return "u32";
        case GgufType::I32: return "i32";
        case GgufType::F32: return "f32";
        case GgufType::BOOL: return "bool";
        case GgufType::STRING: return "string";
        case GgufType::ARRAY: return "array";
        case GgufType::U64: return "u64";
        case GgufType::I64: return "i64";
        case GgufType::F64: return "f64";
    }
    return "unknown";
}

GgufValue GgufValue::make_u32(uint32_t v) {
    GgufValue g;
    g.type = GgufType::U32;
    g.data = static_cast<uint64_t>(v);
    return g;
}

GgufValue GgufValue::make_u64(uint64_t v) {
    GgufValue g;
    g.type = GgufType::U64;
    g.data = v;
    return g;
}

GgufValue GgufValue::make_i32(int32_t v) {
    GgufValue g;
    g.type = GgufType::I32;
    g.data = static_cast<int64_t>(v);
    return g;
}

GgufValue GgufValue::make_f32(float v) {
    GgufValue g;
    g.type = GgufType::F32;
    g.data = static_cast<double>(v);
    return g;
}

GgufValue GgufValue::make_bool(bool v) {
    GgufValue g;
    g.type = GgufType::BOOL;
    g.data = v;
    return g;
}

GgufValue GgufValue::make_string(std::string v) {
    GgufValue g;
    g.type = GgufType::STRING;
    g.data = std::move(v);
    return g;
}

uint64_t GgufValue::as_uint() const {
    if (const uint64_t* p = std::get_if<uint64_t>(&data)) {
        return *p;
    }
    if (const int64_t* p = std::get_if<int64_t>(&data)) {
        if (*p >= 0) {
            return static_cast<uint64_t>(*p);
        }
    }
    throw std::runtime_error("metadata value is not an unsigned integer");
}

int64_t GgufValue::as_int() const {
    if (const int64_t* p = std::get_if<int64_t>(&data)) {
        return *p;
    }
    if (const uint64_t* p = std::get_if<uint64_t>(&data)) {
        if (*p <= static_cast<uint64_t>(INT64_MAX)) {
            return static_cast<int64_t>(*p);
        }
    }
    throw std::runtime_error("metadata value is not a signed integer");
}

double GgufValue::as_float() const {
    if (const double* p = std::get_if<double>(&data)) {
        return *p;
    }
    throw std::runtime_error("metadata value is not a float");
}

bool GgufValue::as_bool() const {
    if (const bool* p = std::get_if<bool>(&data)) {
        return *p;
    }
    throw std::runtime_error("metadata value is not a bool");
}

const std::string& GgufValue::as_string() const {
    if (const std::string* p = std::get_if<std::string>(&data)) {
        return *p;
    }
    throw std::runtime_error("metadata value is not a string");
}

const std::vector<GgufValue>& GgufValue::as_array() const {
    if (const auto* p = std::get_if<std::vector<GgufValue>>(&data)) {
        return *p;
    }
    throw std::runtime_error("metadata value is not an array");
}

uint64_t TensorEntry::n_elements() const {
    uint64_t n = ne.empty() ? 0 : 1;
    for (uint64_t d : ne) {
        n *= d;
    }
    return n;
}

uint64_t TensorEntry::byte_size() const {
    const FormatInfo& info = format_info(format);
    if (row_length() % info.block_len != 0) {
        throw std::runtime_error("tensor " + name + " row length " +
                                 std::to_string(row_length()) +
                                 " is not a multiple of the " +
                                 std::string(info.name) + " block length");
    }
    return n_elements() / info.block_len * info.block_bytes;
}

const GgufValue* ContainerFile::find_meta(const std::string& key) const {
    for (const auto& [k, v] : metadata) {
        if (k == key) {
            return &v;
        }
    }
    return nullptr;
}

GgufValue* ContainerFile::find_meta(const std::string& key) {
    for (auto& [k, v] : metadata) {
        if (k == key) {
            return &v;
        }
    }
    return nullptr;
}

void ContainerFile::set_meta(const std::string& key, GgufValue v) {
    if (GgufValue* existing = find_meta(key)) {
        *existing = std::move(v);
    } else {
        metadata.emplace_back(key, std::move(v));
    }
}

const TensorEntry* ContainerFile::find_tensor(const std::string& name) const {
    for (const TensorEntry& t : tensors) {
        if (t.name == name) {
            return &t;
        }
    }
    return nullptr;
}

ContainerFile read_container_bytes(const std::vector<uint8_t>& bytes) {
    reader r{bytes.data(), bytes.size()};
    const uint32_t magic = r.scalar<uint32_t>("magic");
    if (magic != kMagic) {
        throw std::runtime_error("bad magic: not a GGUF file");
    }
    ContainerFile file;
    file.version = r.scalar<uint32_t>("version");
    if (file.version != kSupportedVersion) {
        throw std::runtime_error("unsupported version " +
                                 std::to_string(file.version) +
                                 " (expected 3)");
    }
    const uint64_t n_tensors = r.scalar<uint64_t>("tensor count");
    const uint64_t n_kv = r.scalar<uint64_t>("metadata count");
    // each kv needs at least a key length + type; each tensor info at least
    // a name length + dims + type + offset; cheap guard against absurd counts
    if (n_kv > r.remaining() / 12) {
        fail_truncated("metadata count exceeds file size");
    }
    if (n_tensors > r.remaining() / 24) {
        fail_truncated("tensor count exceeds file size");
    }

    std::set<std::string> seen_keys;
    for (uint64_t i = 0; i < n_kv; ++i) {
        std::string key = r.string();
        if (!seen_keys.insert(key).second) {
            throw std::runtime_error("duplicate metadata key " + key);
        }
        const int32_t raw_type = r.scalar<int32_t>("metadata value type");
        if (!valid_type(raw_type)) {
            throw std::runtime_error("unknown metadata value type " +
                                     std::to_string(raw_type));
        }
        GgufValue v = read_value(r, static_cast<GgufType>(raw_type), 0);
        file.metadata.emplace_back(std::move(key), std::move(v));
    }

    if (const GgufValue* a = file.find_meta("general.alignment")) {
        const uint64_t align = a->as_uint();
        if (align == 0 || (align & (align - 1)) != 0) {
            throw std::runtime_error("general.alignment is not a power of two");
        }
        file.alignment = static_cast<uint32_t>(align);
    } else {
        file.alignment = kDefaultAlignment;
    }

    std::set<std::string> seen_names;
    for (uint64_t i = 0; i < n_tensors; ++i) {
        TensorEntry t;
        t.name = r.string();
        if (t.name.empty()) {
            throw std::runtime_error("tensor with empty name");
        }
        if (!seen_names.insert(t.name).second) {
            throw std::runtime_error("duplicate tensor name " + t.name);
        }
        const uint32_t n_dims = r.scalar<uint32_t>("tensor rank");
        if (n_dims == 0 || n_dims > kMaxDims) {
            throw std::runtime_error("tensor " + t.name + " has bad rank " +
                                     std::to_string(n_dims));
        }
        t.ne.resize(n_dims);
        uint64_t elems = 1;
        for (uint32_t d = 0; d < n_dims; ++d) {
            t.ne[d] = r.scalar<uint64_t>("tensor dimension");
            if (t.ne[d] == 0 || t.ne[d] > (1ull << 40) ||
                elems > (1ull << 48) / t.ne[d]) {
                throw std::runtime_error("tensor " + t.name +
                                         " has bad dimensions");
            }
            elems *= t.ne[d];
        }
        const uint32_t type_code = r.scalar<uint32_t>("tensor type");
        t.format = format_from_type_code(type_code);
        t.offset = r.scalar<uint64_t>("tensor offset");
        if (t.offset % file.alignment != 0) {
            throw std::runtime_error("misaligned tensor offset for " + t.name);
        }
        file.tensors.push_back(std::move(t));
    }

    const uint64_t data_start = align_up(r.off, file.alignment);
    file.data_offset = data_start;
    for (TensorEntry& t : file.tensors) {
        const uint64_t bytes_needed = t.byte_size();
        if (data_start > r.size || t.offset > r.size - data_start ||
            r.size - data_start - t.offset < bytes_needed) {
            fail_truncated("tensor data for " + t.name);
        }
        const uint64_t begin = data_start + t.offset;
        t.data.assign(r.data + begin, r.data + begin + bytes_needed);
    }
    return file;
}

ContainerFile read_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open model file: " + path);
    }
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw std::runtime_error("read error on " + path);
    }
    return read_container_bytes(bytes);
}

std::vector<uint8_t> write_container_bytes(const ContainerFile& file) {
    if (file.alignment == 0 || (file.alignment & (file.alignment - 1)) != 0) {
        throw std::runtime_error("container alignment is not a power of two");
    }
    // canonical data layout: tensors in order, each aligned up
    std::vector<uint64_t> offsets(file.tensors.size());
    uint64_t cursor = 0;
    for (size_t i = 0; i < file.tensors.size(); ++i) {
        const TensorEntry& t = file.tensors[i];
        const uint64_t need = t.byte_size();
        if (t.data.size() != need) {
            throw std::runtime_error(
                "tensor " + t.name + " has " + std::to_string(t.data.size()) +
                " payload bytes, expected " + std::to_string(need));
        }
        cursor = align_up(cursor, file.alignment);
        offsets[i] = cursor;
        cursor += need;
    }

    std::vector<uint8_t> out;
    write_scalar<uint32_t>(out, kMagic);
    write_scalar<uint32_t>(out, kSupportedVersion);
    write_scalar<uint64_t>(out, file.tensors.size());
    write_scalar<uint64_t>(out, file.metadata.size());
    for (const auto& [key, value] : file.metadata) {
        write_string(out, key);
        write_scalar<int32_t>(out, static_cast<int32_t>(value.type));
        write_value(out, value);
    }
    for (size_t i = 0; i < file.tensors.size(); ++i) {
        const TensorEntry& t = file.tensors[i];
        write_string(out, t.name);
        write_scalar<uint32_t>(out, static_cast<uint32_t>(t.ne.size()));
        for (uint64_t d : t.ne) {
            write_scalar<uint64_t>(out, d);
        }
        write_scalar<uint32_t>(out, format_type_code(t.format));
        write_scalar<uint64_t>(out, offsets[i]);
    }
    out.resize(align_up(out.size(), file.alignment), 0);
    const size_t data_start = out.size();
    for (size_t i = 0; i < file.tensors.size(); ++i) {
        out.resize(data_start + offsets[i], 0);  // inter-tensor padding
        write_bytes(out, file.tensors[i].data.data(),
                    file.tensors[i].data.size());
    }
    return out;
}

void write_container(const ContainerFile& file, const std::string& path) {
    const std::vector<uint8_t> bytes = write_container_bytes(file);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot create " + path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
        throw std::runtime_error("write error on " + path);
    }
}

}  // namespace kqf
