#pragma once

#include <sys/wait.h>

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tu {

inline std::string fixture_path(const std::string& rel) {
    return std::string(KQF_FIXTURE_DIR "/") + rel;
}

inline std::string config_path(const std::string& rel) {
    return std::string(KQF_CONFIG_DIR "/") + rel;
}

inline nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    return nlohmann::json::parse(in);
}

inline std::vector<uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
}

inline void write_bytes(const std::string& path,
                        const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
}

inline float bits_to_float(uint32_t u) {
    float f;
    std::memcpy(&f, &u, sizeof f);
    return f;
}

inline uint32_t float_to_bits(float f) {
    uint32_t u;
    std::memcpy(&u, &f, sizeof u);
    return u;
}

inline std::vector<uint8_t> from_hex(const std::string& hex) {
    if (hex.size() % 2 != 0) {
        throw std::runtime_error("odd hex string length");
    }
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw std::runtime_error("bad hex digit");
    };
    std::vector<uint8_t> out(hex.size() / 2);
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<uint8_t>(nibble(hex[2 * i]) << 4 |
                                      nibble(hex[2 * i + 1]));
    }
    return out;
}

inline std::string to_hex(const uint8_t* data, size_t n) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(2 * n);
    for (size_t i = 0; i < n; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0xF]);
    }
    return out;
}

// deterministic gaussian-ish block filler used by monotonicity/determinism
// tests: sum of 12 uniforms, runs identically everywhere
inline std::vector<float> seeded_block(uint64_t seed, size_t n,
                                       float scale = 1.0f) {
    std::mt19937_64 rng(seed);
    std::vector<float> out(n);
    for (size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = 0; k < 12; ++k) {
            acc += static_cast<double>(rng() >> 11) *
                   (1.0 / 9007199254740992.0);
        }
        out[i] = static_cast<float>(acc - 6.0) * scale;
    }
    return out;
}

struct TempDir {
    std::filesystem::path path;

    TempDir() {
        std::random_device rd;
        for (int attempt = 0; attempt < 32; ++attempt) {
            std::filesystem::path p =
                std::filesystem::temp_directory_path() /
                ("kqf_test_" + std::to_string(rd()));
            std::error_code ec;
            if (std::filesystem::create_directory(p, ec)) {
                path = p;
                return;
            }
        }
        throw std::runtime_error("cannot create temp directory");
    }

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }

    std::string file(const std::string& name) const {
        return (path / name).string();
    }
};

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// runs via the shell, capturing stdout and stderr separately
inline CommandResult run_command(const std::string& cmd) {
    TempDir dir;
    const std::string err_file = dir.file("stderr.txt");
    const std::string full = cmd + " 2>" + err_file;
    CommandResult result;
    FILE* pipe = popen(full.c_str(), "r");
    if (pipe == nullptr) {
        throw std::runtime_error("popen failed for: " + cmd);
    }
    std::array<char, 4096> buf;
    size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) {
        result.out.append(buf.data(), got);
    }
    const int status = pclose(pipe);
    result.exit_code = (status >= 0 && WIFEXITED(status))
                           ? WEXITSTATUS(status)
                           : -1;
    std::ifstream err(err_file);
    std::ostringstream ss;
    ss << err.rdbuf();
    result.err = ss.str();
    return result;
}

}  // namespace tu
