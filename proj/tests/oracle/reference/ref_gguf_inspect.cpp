// Minimal GGUF v3 inspector used once to cross-validate the fixture writer.
// Read flow transcribed from the llama.cpp GGUF reader (MIT License):
// magic, u32 version, u64 n_tensors, u64 n_kv; key-value pairs with typed
// values (arrays = i32 element type + u64 count + payload); tensor infos
// (name, u32 n_dims, u64 ne[], i32 type, u64 offset); data region aligned to
// general.alignment (default 32).
//
// Usage: ref_gguf_inspect <file.gguf>
// Prints one line per kv and per tensor; exits nonzero on malformed input.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

enum gguf_type {
    GGUF_TYPE_UINT8   = 0,
    GGUF_TYPE_INT8    = 1,
    GGUF_TYPE_UINT16  = 2,
    GGUF_TYPE_INT16   = 3,
    GGUF_TYPE_UINT32  = 4,
    GGUF_TYPE_INT32   = 5,
    GGUF_TYPE_FLOAT32 = 6,
    GGUF_TYPE_BOOL    = 7,
    GGUF_TYPE_STRING  = 8,
    GGUF_TYPE_ARRAY   = 9,
    GGUF_TYPE_UINT64  = 10,
    GGUF_TYPE_INT64   = 11,
    GGUF_TYPE_FLOAT64 = 12,
};

static size_t gguf_type_size(int type) {
    switch (type) {
        case GGUF_TYPE_UINT8: case GGUF_TYPE_INT8: case GGUF_TYPE_BOOL: return 1;
        case GGUF_TYPE_UINT16: case GGUF_TYPE_INT16: return 2;
        case GGUF_TYPE_UINT32: case GGUF_TYPE_INT32: case GGUF_TYPE_FLOAT32: return 4;
        case GGUF_TYPE_UINT64: case GGUF_TYPE_INT64: case GGUF_TYPE_FLOAT64: return 8;
        default: return 0;
    }
}

static bool gguf_fread_el(FILE * file, void * dst, size_t size, size_t * offset) {
    const size_t n = fread(dst, 1, size, file);
    *offset += n;
    return n == size;
}

static bool gguf_fread_str(FILE * file, std::string * s, size_t * offset) {
    uint64_t n = 0;
    if (!gguf_fread_el(file, &n, sizeof(n), offset)) return false;
    if (n > (1u << 20)) {
        fprintf(stderr, "invalid string length (%" PRIu64 ")\n", n);
        return false;
    }
    s->resize(n);
    return n == 0 || gguf_fread_el(file, s->data(), n, offset);
}

int main(int argc, char ** argv) {
    if (argc != 2) {
        fprintf(stderr, "usage: ref_gguf_inspect <file.gguf>\n");
        return 2;
    }
    FILE * file = fopen(argv[1], "rb");
    if (!file) {
        fprintf(stderr, "failed to open '%s'\n", argv[1]);
        return 1;
    }
    size_t offset = 0;
    bool ok = true;

    char magic[4];
    ok = ok && gguf_fread_el(file, magic, 4, &offset);
    if (!ok || memcmp(magic, "GGUF", 4) != 0) {
        fprintf(stderr, "invalid magic\n");
        fclose(file);
        return 1;
    }
    uint32_t version = 0;
    uint64_t n_tensors = 0, n_kv = 0;
    ok = ok && gguf_fread_el(file, &version, sizeof(version), &offset);
    ok = ok && gguf_fread_el(file, &n_tensors, sizeof(n_tensors), &offset);
    ok = ok && gguf_fread_el(file, &n_kv, sizeof(n_kv), &offset);
    if (!ok || version != 3) {
        fprintf(stderr, "failed to read v3 header\n");
        fclose(file);
        return 1;
    }
    printf("version=%u n_tensors=%" PRIu64 " n_kv=%" PRIu64 "\n", version, n_tensors, n_kv);

    size_t alignment = 32;
    for (uint64_t i = 0; ok && i < n_kv; ++i) {
        std::string key;
        int32_t type = -1;
        ok = ok && gguf_fread_str(file, &key, &offset);
        ok = ok && gguf_fread_el(file, &type, sizeof(type), &offset);
        if (!ok) break;
        std::string shown;
        switch (type) {
            case GGUF_TYPE_UINT8: case GGUF_TYPE_INT8: case GGUF_TYPE_BOOL:
            case GGUF_TYPE_UINT16: case GGUF_TYPE_INT16:
            case GGUF_TYPE_UINT32: case GGUF_TYPE_INT32: case GGUF_TYPE_FLOAT32:
            case GGUF_TYPE_UINT64: case GGUF_TYPE_INT64: case GGUF_TYPE_FLOAT64: {
                uint64_t raw = 0;
                ok = ok && gguf_fread_el(file, &raw, gguf_type_size(type), &offset);
                if (type == GGUF_TYPE_UINT32 && key == "general.alignment") {
                    alignment = (uint32_t)raw;
                }
                char buf[32];
                snprintf(buf, sizeof(buf), "0x%" PRIx64, raw);
                shown = buf;
            } break;
            case GGUF_TYPE_STRING:
                ok = ok && gguf_fread_str(file, &shown, &offset);
                break;
            case GGUF_TYPE_ARRAY: {
                int32_t arr_type = -1;
                uint64_t n = 0;
                ok = ok && gguf_fread_el(file, &arr_type, sizeof(arr_type), &offset);
                ok = ok && gguf_fread_el(file, &n, sizeof(n), &offset);
                if (!ok) break;
                if (arr_type == GGUF_TYPE_STRING) {
                    for (uint64_t j = 0; ok && j < n; ++j) {
                        std::string tmp;
                        ok = gguf_fread_str(file, &tmp, &offset);
                    }
                } else if (gguf_type_size(arr_type) > 0) {
                    std::vector<uint8_t> tmp(n * gguf_type_size(arr_type));
                    ok = ok && gguf_fread_el(file, tmp.data(), tmp.size(), &offset);
                } else {
                    fprintf(stderr, "invalid array type %d\n", arr_type);
                    ok = false;
                }
                char buf[48];
                snprintf(buf, sizeof(buf), "arr(type=%d,n=%" PRIu64 ")", arr_type, n);
                shown = buf;
            } break;
            default:
                fprintf(stderr, "invalid type %d\n", type);
                ok = false;
                break;
        }
        if (ok) printf("kv %s type=%d value=%s\n", key.c_str(), type, shown.c_str());
    }
    if (!ok) {
        fprintf(stderr, "failed to read key-value pairs\n");
        fclose(file);
        return 1;
    }

    for (uint64_t i = 0; ok && i < n_tensors; ++i) {
        std::string name;
        uint32_t n_dims = 0;
        ok = ok && gguf_fread_str(file, &name, &offset);
        ok = ok && gguf_fread_el(file, &n_dims, sizeof(n_dims), &offset);
        if (!ok || n_dims > 4) {
            fprintf(stderr, "bad tensor info\n");
            ok = false;
            break;
        }
        uint64_t ne[4] = {1, 1, 1, 1};
        for (uint32_t d = 0; ok && d < n_dims; ++d) {
            ok = gguf_fread_el(file, &ne[d], sizeof(ne[d]), &offset);
        }
        int32_t type = -1;
        uint64_t toff = 0;
        ok = ok && gguf_fread_el(file, &type, sizeof(type), &offset);
        ok = ok && gguf_fread_el(file, &toff, sizeof(toff), &offset);
        if (!ok) break;
        if (toff % alignment != 0) {
            fprintf(stderr, "tensor offset %" PRIu64 " not aligned\n", toff);
            ok = false;
            break;
        }
        printf("tensor %s n_dims=%u ne=[%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64 "] type=%d offset=%" PRIu64 "\n",
               name.c_str(), n_dims, ne[0], ne[1], ne[2], ne[3], type, toff);
    }
    if (!ok) {
        fprintf(stderr, "failed to read tensor infos\n");
        fclose(file);
        return 1;
    }

    size_t data_offset = offset;
    if (data_offset % alignment != 0) {
        data_offset += alignment - data_offset % alignment;
    }
    printf("alignment=%zu data_offset=%zu\n", alignment, data_offset);
    fclose(file);
    return 0;
}
