#pragma once

#include <cstdint>
#include <cstring>

namespace kqf {

// Software IEEE 754 binary16 conversions. Hardware F16C gives the same
// results but is not guaranteed to exist, and quantized bytes must be
// identical on every host.

// Exact: every half value is representable as a float.
inline float f16_to_f32(uint16_t h) {
    const uint32_t sign = (uint32_t)(h & 0x8000u) << 16;
    const uint32_t exp = (h >> 10) & 0x1Fu;
    const uint32_t man = h & 0x3FFu;
    uint32_t bits;
    if (exp == 0) {
        if (man == 0) {
            bits = sign;
        } else {
            uint32_t m = man;
            int e = -1;
            do {
                m <<= 1;
                ++e;
            } while (!(m & 0x400u));
            bits = sign | ((uint32_t)(127 - 15 - e) << 23) | ((m & 0x3FFu) << 13);
        }
    } else if (exp == 31) {
        bits = sign | 0x7F800000u | (man << 13);
    } else {
        bits = sign | ((exp + 127 - 15) << 23) | (man << 13);
    }
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

// Round-to-nearest-even, handling subnormals, overflow to inf, and NaN.
inline uint16_t f32_to_f16(float f) {
    uint32_t x;
    std::memcpy(&x, &f, 4);
    const uint16_t h_sgn = (uint16_t)((x & 0x80000000u) >> 16);
    const uint32_t f_exp = x & 0x7F800000u;

    if (f_exp >= 0x47800000u) {
        if (f_exp == 0x7F800000u) {
            const uint32_t f_sig = x & 0x007FFFFFu;
            if (f_sig != 0) {
                uint16_t ret = (uint16_t)(0x7C00u + (f_sig >> 13));
                if (ret == 0x7C00u) {
                    ++ret;  // keep NaN a NaN when the payload bits shift out
                }
                return (uint16_t)(h_sgn + ret);
            }
            return (uint16_t)(h_sgn + 0x7C00u);
        }
        return (uint16_t)(h_sgn + 0x7C00u);  // overflow to signed inf
    }

    if (f_exp <= 0x38000000u) {
        // becomes a subnormal half or signed zero
        if (f_exp < 0x33000000u) {
            return h_sgn;  // magnitude below half of the smallest subnormal
        }
        const uint32_t e = f_exp >> 23;
        uint32_t f_sig = 0x00800000u + (x & 0x007FFFFFu);
        f_sig >>= (113 - e);
        // ties-to-even; the shift can drop up to 11 bits, so consult the
        // original low bits when detecting an exact tie
        if (((f_sig & 0x00003FFFu) != 0x00001000u) || (x & 0x000007FFu)) {
            f_sig += 0x00001000u;
        }
        return (uint16_t)(h_sgn + (uint16_t)(f_sig >> 13));
    }

    const uint16_t h_exp = (uint16_t)((f_exp - 0x38000000u) >> 13);
    uint32_t f_sig = x & 0x007FFFFFu;
    if ((f_sig & 0x00003FFFu) != 0x00001000u) {
        f_sig += 0x00001000u;  // ties-to-even
    }
    const uint16_t h_sig = (uint16_t)(f_sig >> 13);
    // a rounding carry spills into the exponent (possibly up to inf), which
    // is the correct rounded result
    return (uint16_t)(h_sgn + h_exp + h_sig);
}

// double -> float32 -> float16, the scale quantization path of the codecs
inline uint16_t f16_from_double(double v) {
    return f32_to_f16((float)v);
}

}  // namespace kqf
