#include "kqf/kquant.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "kqf/fp16.hpp"
#include "kqf/parallel.hpp"

// Encoding runs in IEEE double precision with sequential accumulation and
// round-half-to-even; super scales quantize double -> float32 -> float16;
// reconstruction (and therefore the error objective) is float32 with the
// multiplication order (d * sub_scale) * q [- (dmin * sub_min)]. All of this
// is load-bearing: encoded bytes must be identical across hosts and thread
// counts, and test fixtures pin the exact output.

namespace kqf {

namespace {

constexpr int kGridSteps = 15;
constexpr int kMaxBlockLen = 256;
constexpr int kMaxSubBlocks = 16;

double grid_factor(int t) { return 0.8 + 0.4 * t / 14.0; }

// round-half-to-even; agrees with std::nearbyint everywhere the codec calls
// it (|v| >= 2^52 is already integral and passes through), but stays inline
// in the grid-search hot loop
inline double rne(double v) {
    constexpr double two52 = 4503599627370496.0;
    if (!(v < two52 && v > -two52)) {
        return v;
    }
    return v >= 0.0 ? (v + two52) - two52 : (v - two52) + two52;
}

double clampd(double v, double lo, double hi) {
    return std::min(std::max(v, lo), hi);
}

// ---------------------------------------------------------------------------
// per-sub-block fitting: 15-step grid around the max/min-derived init

double naive_sub_symmetric(const double* xs, int n, int qmin, int qmax) {
    double amax = 0.0;
    int imax = 0;
    for (int i = 0; i < n; ++i) {
        const double a = std::fabs(xs[i]);
        if (a > amax) {
            amax = a;
            imax = i;
        }
    }
    if (amax == 0.0) {
        return 0.0;
    }
    const double xm = xs[imax];
    return xm / (xm < 0 ? qmin : qmax);
}

double fit_sub_symmetric(const double* xs, int n, int qmin, int qmax) {
    const double s0 = naive_sub_symmetric(xs, n, qmin, qmax);
    if (s0 == 0.0) {
        return 0.0;
    }
    double best_err = std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    for (int t = 0; t < kGridSteps; ++t) {
        const double sc = s0 * grid_factor(t);
        double err = 0.0;
        for (int i = 0; i < n; ++i) {
            const double q = clampd(rne(xs[i] / sc), qmin, qmax);
            const double r = xs[i] - sc * q;
            err += r * r;
        }
        if (err < best_err) {
            best_err = err;
            best_s = sc;
        }
    }
    return best_s;
}

struct scale_offset {
    double scale = 0.0;
    double offset = 0.0;  // reconstruction is scale * q + offset
};

scale_offset naive_sub_asymmetric(const double* xs, int n, int qmax) {
    double vmin = xs[0];
    double vmax = xs[0];
    for (int i = 1; i < n; ++i) {
        vmin = std::min(vmin, xs[i]);
        vmax = std::max(vmax, xs[i]);
    }
    if (vmax == vmin) {
        return {0.0, vmin};
    }
    return {(vmax - vmin) / qmax, vmin};
}

scale_offset fit_sub_asymmetric(const double* xs, int n, int qmax) {
    const scale_offset init = naive_sub_asymmetric(xs, n, qmax);
    if (init.scale == 0.0) {
        return init;
    }
    double best_err = std::numeric_limits<double>::infinity();
    scale_offset best;
    for (int t = 0; t < kGridSteps; ++t) {
        const double sc = init.scale * grid_factor(t);
        for (int u = 0; u < kGridSteps; ++u) {
            const double oc = init.offset * grid_factor(u);
            double err = 0.0;
            for (int i = 0; i < n; ++i) {
                const double q = clampd(rne((xs[i] - oc) / sc), 0.0, qmax);
                const double r = xs[i] - (sc * q + oc);
                err += r * r;
            }
            if (err < best_err) {
                best_err = err;
                best.scale = sc;
                best.offset = oc;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// joint super-block stage: integerize sub-scales against a half-precision
// super scale, requantize elements against the effective float32 scales

struct sym_enc {
    uint16_t d_bits = 0;
    int nsb = 0;
    int L[kMaxSubBlocks] = {};
    int Q[kMaxBlockLen] = {};
    double err = 0.0;
};

void encode_symmetric(const float* x, int n, const double* subs, int nsb,
                      int qmin, int qmax, int ls_min, int ls_max,
                      sym_enc& enc) {
    const int sub_len = n / nsb;
    enc.nsb = nsb;
    double sab = 0.0;
    int ib = 0;
    for (int b = 0; b < nsb; ++b) {
        const double a = std::fabs(subs[b]);
        if (a > sab) {
            sab = a;
            ib = b;
        }
    }
    if (sab == 0.0) {
        enc.d_bits = f16_from_double(0.0);
        for (int b = 0; b < nsb; ++b) {
            enc.L[b] = 0;
        }
    } else {
        const double sref = subs[ib];
        const double d0 = sref / (sref < 0 ? ls_min : ls_max);
        enc.d_bits = f16_from_double(d0);
        for (int b = 0; b < nsb; ++b) {
            enc.L[b] = static_cast<int>(
                clampd(rne(subs[b] / d0), ls_min, ls_max));
        }
    }
    const float d_f = f16_to_f32(enc.d_bits);
    double err = 0.0;
    for (int b = 0; b < nsb; ++b) {
        const float eff = d_f * static_cast<float>(enc.L[b]);
        for (int i = b * sub_len; i < (b + 1) * sub_len; ++i) {
            const double xi = x[i];
            int q = 0;
            if (eff != 0.0f) {
                q = static_cast<int>(
                    clampd(rne(xi / static_cast<double>(eff)), qmin, qmax));
            }
            enc.Q[i] = q;
            const float r = eff * static_cast<float>(q);
            const double dlt = xi - static_cast<double>(r);
            err += dlt * dlt;
        }
    }
    enc.err = err;
}

void encode_q8_0(const float* x, double s, sym_enc& enc) {
    enc.d_bits = f16_from_double(s);
    enc.nsb = 0;
    const float d_f = f16_to_f32(enc.d_bits);
    double err = 0.0;
    for (int i = 0; i < 32; ++i) {
        const double xi = x[i];
        int q = 0;
        if (d_f != 0.0f) {
            q = static_cast<int>(
                clampd(rne(xi / static_cast<double>(d_f)), -128.0, 127.0));
        }
        enc.Q[i] = q;
        const float r = d_f * static_cast<float>(q);
        const double dlt = xi - static_cast<double>(r);
        err += dlt * dlt;
    }
    enc.err = err;
}

struct asym_enc {
    uint16_t d_bits = 0;
    uint16_t dmin_bits = 0;
    int nsb = 0;
    int Ls[kMaxSubBlocks] = {};
    int Lm[kMaxSubBlocks] = {};
    int Q[kMaxBlockLen] = {};
    double err = 0.0;
};

void encode_asymmetric(const float* x, int n, const scale_offset* subs,
                       int nsb, int qmax, int l_max, asym_enc& enc) {
    const int sub_len = n / nsb;
    enc.nsb = nsb;
    double m[kMaxSubBlocks];
    for (int b = 0; b < nsb; ++b) {
        m[b] = -subs[b].offset;
    }
    double smax = 0.0;
    for (int b = 0; b < nsb; ++b) {
        if (subs[b].scale > smax) {
            smax = subs[b].scale;
        }
    }
    const double d0 = smax > 0.0 ? smax / l_max : 0.0;
    double mab = 0.0;
    int im = 0;
    for (int b = 0; b < nsb; ++b) {
        const double a = std::fabs(m[b]);
        if (a > mab) {
            mab = a;
            im = b;
        }
    }
    const double mref = m[im];
    // sign-preserving so positive offsets (negative mins) stay representable
    const double dmin0 = mref != 0.0 ? mref / l_max : 0.0;
    enc.d_bits = f16_from_double(d0);
    enc.dmin_bits = f16_from_double(dmin0);
    const float d_f = f16_to_f32(enc.d_bits);
    const float dmin_f = f16_to_f32(enc.dmin_bits);
    for (int b = 0; b < nsb; ++b) {
        enc.Ls[b] = d0 > 0.0
                        ? static_cast<int>(
                              clampd(rne(subs[b].scale / d0), 0.0, l_max))
                        : 0;
        enc.Lm[b] = dmin0 != 0.0
                        ? static_cast<int>(clampd(rne(m[b] / dmin0), 0.0, l_max))
                        : 0;
    }
    double err = 0.0;
    for (int b = 0; b < nsb; ++b) {
        const float eff_s = d_f * static_cast<float>(enc.Ls[b]);
        const float eff_m = dmin_f * static_cast<float>(enc.Lm[b]);
        for (int i = b * sub_len; i < (b + 1) * sub_len; ++i) {
            const double xi = x[i];
            int q = 0;
            if (eff_s != 0.0f) {
                q = static_cast<int>(clampd(
                    rne((xi + static_cast<double>(eff_m)) /
                        static_cast<double>(eff_s)),
                    0.0, qmax));
            }
            enc.Q[i] = q;
            const float r = (eff_s * static_cast<float>(q)) - eff_m;
            const double dlt = xi - static_cast<double>(r);
            err += dlt * dlt;
        }
    }
    enc.err = err;
}

// ---------------------------------------------------------------------------
// packing

void put_le16(uint8_t* out, uint16_t bits) {
    out[0] = static_cast<uint8_t>(bits & 0xFF);
    out[1] = static_cast<uint8_t>(bits >> 8);
}

uint16_t get_le16(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

// shared 2-bit packing: per 128-element chunk, byte l holds elements l,
// l+32, l+64, l+96 at bit positions 0/2/4/6
void pack_2bit_groups(const int* L, uint8_t* qs) {
    for (int j = 0; j < 256; j += 128) {
        for (int l = 0; l < 32; ++l) {
            qs[j / 4 + l] = static_cast<uint8_t>(
                L[j + l] | (L[j + l + 32] << 2) | (L[j + l + 64] << 4) |
                (L[j + l + 96] << 6));
        }
    }
}

void pack_q2_k(uint16_t d_bits, uint16_t dmin_bits, const int* Ls,
               const int* Lm, const int* Q, uint8_t* out) {
    for (int b = 0; b < 16; ++b) {
        out[b] = static_cast<uint8_t>(Ls[b] | (Lm[b] << 4));
    }
    pack_2bit_groups(Q, out + 16);
    put_le16(out + 80, d_bits);
    put_le16(out + 82, dmin_bits);
}

void pack_q3_k(uint16_t d_bits, const int* L, const int* Q, uint8_t* out) {
    std::memset(out, 0, 110);
    uint8_t* hmask = out;
    int low[256];
    for (int j = 0; j < 256; ++j) {
        int v = Q[j] + 4;
        if (v > 3) {
            hmask[j % 32] |= static_cast<uint8_t>(1 << (j / 32));
            v -= 4;
        }
        low[j] = v;
    }
    pack_2bit_groups(low, out + 32);
    uint8_t* scales = out + 96;
    for (int j = 0; j < 16; ++j) {
        const int l = L[j] + 32;
        if (j < 8) {
            scales[j] |= static_cast<uint8_t>(l & 0xF);
        } else {
            scales[j - 8] |= static_cast<uint8_t>((l & 0xF) << 4);
        }
        scales[j % 4 + 8] |=
            static_cast<uint8_t>(((l >> 4) & 3) << (2 * (j / 4)));
    }
    put_le16(out + 108, d_bits);
}

void pack_scale_min_k4(const int* Ls, const int* Lm, uint8_t* scales) {
    std::memset(scales, 0, 12);
    for (int j = 0; j < 8; ++j) {
        const int ls = Ls[j];
        const int lm = Lm[j];
        if (j < 4) {
            scales[j] = static_cast<uint8_t>(ls);
            scales[j + 4] = static_cast<uint8_t>(lm);
        } else {
            scales[j + 4] = static_cast<uint8_t>((ls & 0xF) | ((lm & 0xF) << 4));
            scales[j - 4] |= static_cast<uint8_t>((ls >> 4) << 6);
            scales[j] |= static_cast<uint8_t>((lm >> 4) << 6);
        }
    }
}

void pack_q4_k(uint16_t d_bits, uint16_t dmin_bits, const int* Ls,
               const int* Lm, const int* Q, uint8_t* out) {
    put_le16(out, d_bits);
    put_le16(out + 2, dmin_bits);
    pack_scale_min_k4(Ls, Lm, out + 4);
    uint8_t* qs = out + 16;
    for (int j = 0; j < 256; j += 64) {
        for (int l = 0; l < 32; ++l) {
            qs[j / 2 + l] = static_cast<uint8_t>(Q[j + l] | (Q[j + l + 32] << 4));
        }
    }
}

void pack_q5_k(uint16_t d_bits, uint16_t dmin_bits, const int* Ls,
               const int* Lm, const int* Q, uint8_t* out) {
    put_le16(out, d_bits);
    put_le16(out + 2, dmin_bits);
    pack_scale_min_k4(Ls, Lm, out + 4);
    uint8_t* qh = out + 16;
    uint8_t* qs = out + 48;
    std::memset(qh, 0, 32);
    int m1 = 1;
    int m2 = 2;
    for (int j = 0; j < 256; j += 64) {
        for (int l = 0; l < 32; ++l) {
            int v1 = Q[j + l];
            if (v1 > 15) {
                v1 -= 16;
                qh[l] |= static_cast<uint8_t>(m1);
            }
            int v2 = Q[j + l + 32];
            if (v2 > 15) {
                v2 -= 16;
                qh[l] |= static_cast<uint8_t>(m2);
            }
            qs[j / 2 + l] = static_cast<uint8_t>(v1 | (v2 << 4));
        }
        m1 <<= 2;
        m2 <<= 2;
    }
}

void pack_q6_k(uint16_t d_bits, const int* L, const int* Q, uint8_t* out) {
    uint8_t* ql = out;
    uint8_t* qh = out + 128;
    uint8_t* scales = out + 192;
    int S[256];
    for (int j = 0; j < 256; ++j) {
        S[j] = Q[j] + 32;
    }
    for (int j = 0; j < 256; j += 128) {
        for (int l = 0; l < 32; ++l) {
            ql[j / 2 + l] = static_cast<uint8_t>((S[j + l] & 0xF) |
                                                 ((S[j + l + 64] & 0xF) << 4));
            ql[j / 2 + l + 32] = static_cast<uint8_t>(
                (S[j + l + 32] & 0xF) | ((S[j + l + 96] & 0xF) << 4));
            qh[j / 4 + l] = static_cast<uint8_t>(
                (S[j + l] >> 4) | ((S[j + l + 32] >> 4) << 2) |
                ((S[j + l + 64] >> 4) << 4) | ((S[j + l + 96] >> 4) << 6));
        }
    }
    for (int j = 0; j < 16; ++j) {
        scales[j] = static_cast<uint8_t>(L[j] & 0xFF);
    }
    put_le16(out + 208, d_bits);
}

void pack_q8_0(uint16_t d_bits, const int* Q, uint8_t* out) {
    put_le16(out, d_bits);
    for (int i = 0; i < 32; ++i) {
        out[2 + i] = static_cast<uint8_t>(Q[i] & 0xFF);
    }
}

// ---------------------------------------------------------------------------
// whole-block encode: grid fit vs naive init through the identical joint
// stage; keep whichever has lower squared error (fit wins ties)

struct block_encoding {
    bool asym = false;
    uint16_t d_bits = 0;
    uint16_t dmin_bits = 0;
    int nsb = 0;
    int n = 0;
    int L[kMaxSubBlocks] = {};   // stored sub-scales (Ls for asymmetric)
    int Lm[kMaxSubBlocks] = {};  // stored sub-mins, asymmetric only
    int Q[kMaxBlockLen] = {};
    double err = 0.0;
};

void encode_sym_block(const float* x, int n, int sub_len, int qmin, int qmax,
                      int ls_min, int ls_max, block_encoding& out) {
    double xs[kMaxBlockLen];
    for (int i = 0; i < n; ++i) {
        xs[i] = x[i];
    }
    const int nsb = n / sub_len;
    double subs_fit[kMaxSubBlocks];
    double subs_naive[kMaxSubBlocks];
    for (int b = 0; b < nsb; ++b) {
        subs_fit[b] = fit_sub_symmetric(xs + b * sub_len, sub_len, qmin, qmax);
        subs_naive[b] =
            naive_sub_symmetric(xs + b * sub_len, sub_len, qmin, qmax);
    }
    sym_enc e_fit;
    sym_enc e_naive;
    encode_symmetric(x, n, subs_fit, nsb, qmin, qmax, ls_min, ls_max, e_fit);
    encode_symmetric(x, n, subs_naive, nsb, qmin, qmax, ls_min, ls_max,
                     e_naive);
    const sym_enc& e = e_fit.err <= e_naive.err ? e_fit : e_naive;
    out.asym = false;
    out.d_bits = e.d_bits;
    out.dmin_bits = 0;
    out.nsb = nsb;
    out.n = n;
    std::copy(e.L, e.L + nsb, out.L);
    std::copy(e.Q, e.Q + n, out.Q);
    out.err = e.err;
}

void encode_q8_0_block(const float* x, block_encoding& out) {
    double xs[32];
    for (int i = 0; i < 32; ++i) {
        xs[i] = x[i];
    }
    const double s_fit = fit_sub_symmetric(xs, 32, -128, 127);
    const double s_naive = naive_sub_symmetric(xs, 32, -128, 127);
    sym_enc e_fit;
    sym_enc e_naive;
    encode_q8_0(x, s_fit, e_fit);
    encode_q8_0(x, s_naive, e_naive);
    const sym_enc& e = e_fit.err <= e_naive.err ? e_fit : e_naive;
    out.asym = false;
    out.d_bits = e.d_bits;
    out.dmin_bits = 0;
    out.nsb = 0;
    out.n = 32;
    std::copy(e.Q, e.Q + 32, out.Q);
    out.err = e.err;
}

void encode_asym_block(const float* x, int n, int sub_len, int qmax, int l_max,
                       block_encoding& out) {
    double xs[kMaxBlockLen];
    for (int i = 0; i < n; ++i) {
        xs[i] = x[i];
    }
    const int nsb = n / sub_len;
    scale_offset subs_fit[kMaxSubBlocks];
    scale_offset subs_naive[kMaxSubBlocks];
    for (int b = 0; b < nsb; ++b) {
        subs_fit[b] = fit_sub_asymmetric(xs + b * sub_len, sub_len, qmax);
        subs_naive[b] = naive_sub_asymmetric(xs + b * sub_len, sub_len, qmax);
    }
    asym_enc e_fit;
    asym_enc e_naive;
    encode_asymmetric(x, n, subs_fit, nsb, qmax, l_max, e_fit);
    encode_asymmetric(x, n, subs_naive, nsb, qmax, l_max, e_naive);
    const asym_enc& e = e_fit.err <= e_naive.err ? e_fit : e_naive;
    out.asym = true;
    out.d_bits = e.d_bits;
    out.dmin_bits = e.dmin_bits;
    out.nsb = nsb;
    out.n = n;
    std::copy(e.Ls, e.Ls + nsb, out.L);
    std::copy(e.Lm, e.Lm + nsb, out.Lm);
    std::copy(e.Q, e.Q + n, out.Q);
    out.err = e.err;
}

void encode_block_core(const float* x, Format fmt, block_encoding& out) {
    switch (fmt) {
        case Format::Q2_K:
            encode_asym_block(x, 256, 16, 3, 15, out);
            break;
        case Format::Q3_K:
            encode_sym_block(x, 256, 16, -4, 3, -32, 31, out);
            break;
        case Format::Q4_K:
            encode_asym_block(x, 256, 32, 15, 63, out);
            break;
        case Format::Q5_K:
            encode_asym_block(x, 256, 32, 31, 63, out);
            break;
        case Format::Q6_K:
            encode_sym_block(x, 256, 16, -32, 31, -128, 127, out);
            break;
        case Format::Q8_0:
            encode_q8_0_block(x, out);
            break;
        default:
            throw std::invalid_argument(std::string(format_name(fmt)) +
                                        " is not a block-quantized format");
    }
}

void pack_encoding(const block_encoding& e, Format fmt, uint8_t* out) {
    switch (fmt) {
        case Format::Q2_K:
            pack_q2_k(e.d_bits, e.dmin_bits, e.L, e.Lm, e.Q, out);
            break;
        case Format::Q3_K:
            pack_q3_k(e.d_bits, e.L, e.Q, out);
            break;
        case Format::Q4_K:
            pack_q4_k(e.d_bits, e.dmin_bits, e.L, e.Lm, e.Q, out);
            break;
        case Format::Q5_K:
            pack_q5_k(e.d_bits, e.dmin_bits, e.L, e.Lm, e.Q, out);
            break;
        case Format::Q6_K:
            pack_q6_k(e.d_bits, e.L, e.Q, out);
            break;
        case Format::Q8_0:
            pack_q8_0(e.d_bits, e.Q, out);
            break;
        default:
            throw std::invalid_argument(std::string(format_name(fmt)) +
                                        " is not a block-quantized format");
    }
}

void validate_block_input(std::span<const float> values, Format fmt) {
    const FormatInfo& info = format_info(fmt);
    if (!is_super_block(fmt)) {
        throw std::invalid_argument(std::string(info.name) +
                                    " is not a block-quantized format");
    }
    if (values.size() != info.block_len) {
        throw std::invalid_argument(
            std::string(info.name) + " block expects " +
            std::to_string(info.block_len) + " values, got " +
            std::to_string(values.size()));
    }
    for (size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw std::invalid_argument("non-finite weight at index " +
                                        std::to_string(i));
        }
    }
}

// ---------------------------------------------------------------------------
// decoding (float32 arithmetic, fixed operation order)

void decode_q2_k(const uint8_t* blk, float* y) {
    const uint8_t* scales = blk;
    const uint8_t* qs = blk + 16;
    const float d = f16_to_f32(get_le16(blk + 80));
    const float dmin = f16_to_f32(get_le16(blk + 82));
    int i = 0;
    int isb = 0;
    for (int n = 0; n < 256; n += 128) {
        for (int j = 0; j < 4; ++j) {
            const int shift = 2 * j;
            for (int half = 0; half < 2; ++half) {
                const int sc = scales[isb++];
                const float dl = d * static_cast<float>(sc & 0xF);
                const float ml = dmin * static_cast<float>(sc >> 4);
                for (int l = 0; l < 16; ++l) {
                    const int q = (qs[n / 4 + 16 * half + l] >> shift) & 3;
                    y[i++] = (dl * static_cast<float>(q)) - ml;
                }
            }
        }
    }
}

void decode_q3_k(const uint8_t* blk, float* y) {
    const uint8_t* hmask = blk;
    const uint8_t* qs = blk + 32;
    const uint8_t* scales = blk + 96;
    const float d = f16_to_f32(get_le16(blk + 108));
    int sc6[16];
    for (int j = 0; j < 16; ++j) {
        const int low = j < 8 ? (scales[j] & 0xF) : (scales[j - 8] >> 4);
        const int hi = (scales[8 + j % 4] >> (2 * (j / 4))) & 3;
        sc6[j] = low | (hi << 4);
    }
    int i = 0;
    int isb = 0;
    for (int n = 0; n < 256; n += 128) {
        for (int j = 0; j < 4; ++j) {
            const int shift = 2 * j;
            const int hbit = n / 32 + j;
            for (int half = 0; half < 2; ++half) {
                const float dl = d * static_cast<float>(sc6[isb++] - 32);
                for (int l = 0; l < 16; ++l) {
                    const int idx = 16 * half + l;
                    int q = (qs[n / 4 + idx] >> shift) & 3;
                    if (!(hmask[idx] & (1 << hbit))) {
                        q -= 4;
                    }
                    y[i++] = dl * static_cast<float>(q);
                }
            }
        }
    }
}

void get_scale_min_k4(int j, const uint8_t* scales, int& sc, int& m) {
    if (j < 4) {
        sc = scales[j] & 63;
        m = scales[j + 4] & 63;
    } else {
        sc = (scales[j + 4] & 0xF) | ((scales[j - 4] >> 6) << 4);
        m = (scales[j + 4] >> 4) | ((scales[j] >> 6) << 4);
    }
}

void decode_q4_k(const uint8_t* blk, float* y) {
    const float d = f16_to_f32(get_le16(blk));
    const float dmin = f16_to_f32(get_le16(blk + 2));
    const uint8_t* scales = blk + 4;
    const uint8_t* qs = blk + 16;
    int i = 0;
    int isb = 0;
    for (int j = 0; j < 256; j += 64) {
        int sc1, m1, sc2, m2;
        get_scale_min_k4(isb, scales, sc1, m1);
        get_scale_min_k4(isb + 1, scales, sc2, m2);
        isb += 2;
        const float d1 = d * static_cast<float>(sc1);
        const float mm1 = dmin * static_cast<float>(m1);
        const float d2 = d * static_cast<float>(sc2);
        const float mm2 = dmin * static_cast<float>(m2);
        for (int l = 0; l < 32; ++l) {
            y[i++] = (d1 * static_cast<float>(qs[j / 2 + l] & 0xF)) - mm1;
        }
        for (int l = 0; l < 32; ++l) {
            y[i++] = (d2 * static_cast<float>(qs[j / 2 + l] >> 4)) - mm2;
        }
    }
}

void decode_q5_k(const uint8_t* blk, float* y) {
    const float d = f16_to_f32(get_le16(blk));
    const float dmin = f16_to_f32(get_le16(blk + 2));
    const uint8_t* scales = blk + 4;
    const uint8_t* qh = blk + 16;
    const uint8_t* qs = blk + 48;
    int i = 0;
    int isb = 0;
    int u1 = 1;
    int u2 = 2;
    for (int j = 0; j < 256; j += 64) {
        int sc1, m1, sc2, m2;
        get_scale_min_k4(isb, scales, sc1, m1);
        get_scale_min_k4(isb + 1, scales, sc2, m2);
        isb += 2;
        const float d1 = d * static_cast<float>(sc1);
        const float mm1 = dmin * static_cast<float>(m1);
        const float d2 = d * static_cast<float>(sc2);
        const float mm2 = dmin * static_cast<float>(m2);
        for (int l = 0; l < 32; ++l) {
            const int q = (qs[j / 2 + l] & 0xF) + ((qh[l] & u1) ? 16 : 0);
            y[i++] = (d1 * static_cast<float>(q)) - mm1;
        }
        for (int l = 0; l < 32; ++l) {
            const int q = (qs[j / 2 + l] >> 4) + ((qh[l] & u2) ? 16 : 0);
            y[i++] = (d2 * static_cast<float>(q)) - mm2;
        }
        u1 <<= 2;
        u2 <<= 2;
    }
}

void decode_q6_k(const uint8_t* blk, float* y) {
    const uint8_t* ql = blk;
    const uint8_t* qh = blk + 128;
    int scales[16];
    for (int j = 0; j < 16; ++j) {
        scales[j] = static_cast<int8_t>(blk[192 + j]);
    }
    const float d = f16_to_f32(get_le16(blk + 208));
    for (int n = 0; n < 256; n += 128) {
        for (int l = 0; l < 32; ++l) {
            const int isb = l / 16;
            const int base = n / 16;
            const int q1 =
                ((ql[n / 2 + l] & 0xF) | (((qh[n / 4 + l] >> 0) & 3) << 4)) - 32;
            const int q2 =
                ((ql[n / 2 + l + 32] & 0xF) | (((qh[n / 4 + l] >> 2) & 3) << 4)) -
                32;
            const int q3 =
                ((ql[n / 2 + l] >> 4) | (((qh[n / 4 + l] >> 4) & 3) << 4)) - 32;
            const int q4 =
                ((ql[n / 2 + l + 32] >> 4) | (((qh[n / 4 + l] >> 6) & 3) << 4)) -
                32;
            y[n + l] = (d * static_cast<float>(scales[base + isb])) *
                       static_cast<float>(q1);
            y[n + l + 32] = (d * static_cast<float>(scales[base + isb + 2])) *
                            static_cast<float>(q2);
            y[n + l + 64] = (d * static_cast<float>(scales[base + isb + 4])) *
                            static_cast<float>(q3);
            y[n + l + 96] = (d * static_cast<float>(scales[base + isb + 6])) *
                            static_cast<float>(q4);
        }
    }
}

void decode_q8_0(const uint8_t* blk, float* y) {
    const float d = f16_to_f32(get_le16(blk));
    for (int i = 0; i < 32; ++i) {
        const int q = static_cast<int8_t>(blk[2 + i]);
        y[i] = static_cast<float>(q) * d;
    }
}

void decode_block_core(const uint8_t* blk, Format fmt, float* y) {
    switch (fmt) {
        case Format::Q2_K:
            decode_q2_k(blk, y);
            break;
        case Format::Q3_K:
            decode_q3_k(blk, y);
            break;
        case Format::Q4_K:
            decode_q4_k(blk, y);
            break;
        case Format::Q5_K:
            decode_q5_k(blk, y);
            break;
        case Format::Q6_K:
            decode_q6_k(blk, y);
            break;
        case Format::Q8_0:
            decode_q8_0(blk, y);
            break;
        default:
            throw std::invalid_argument(std::string(format_name(fmt)) +
                                        " is not a block-quantized format");
    }
}

uint64_t shape_elements(const std::vector<uint64_t>& shape) {
    if (shape.empty()) {
        throw std::invalid_argument("empty tensor shape");
    }
    uint64_t n = 1;
    for (uint64_t d : shape) {
        if (d == 0) {
            throw std::invalid_argument("tensor shape has a zero dimension");
        }
        n *= d;
    }
    return n;
}

}  // namespace

// ---------------------------------------------------------------------------
// public block API

BlockParams fit_block_params(std::span<const float> values, Format fmt) {
    validate_block_input(values, fmt);
    block_encoding e;
    encode_block_core(values.data(), fmt, e);
    BlockParams p;
    p.d_bits = e.d_bits;
    p.dmin_bits = e.dmin_bits;
    p.sub_scales.assign(e.L, e.L + e.nsb);
    if (e.asym) {
        p.sub_mins.assign(e.Lm, e.Lm + e.nsb);
    }
    p.quants.assign(e.Q, e.Q + e.n);
    p.sq_err = e.err;
    return p;
}

void quantize_block(std::span<const float> values, Format fmt, uint8_t* out) {
    validate_block_input(values, fmt);
    block_encoding e;
    encode_block_core(values.data(), fmt, e);
    pack_encoding(e, fmt, out);
}

void dequantize_block(std::span<const uint8_t> block, Format fmt, float* out) {
    const FormatInfo& info = format_info(fmt);
    if (!is_super_block(fmt)) {
        throw std::invalid_argument(std::string(info.name) +
                                    " is not a block-quantized format");
    }
    if (block.size() != info.block_bytes) {
        throw std::invalid_argument(
            std::string(info.name) + " block expects " +
            std::to_string(info.block_bytes) + " bytes, got " +
            std::to_string(block.size()));
    }
    decode_block_core(block.data(), fmt, out);
}

// ---------------------------------------------------------------------------
// tensor API

uint64_t QuantizedTensor::n_elements() const {
    if (shape.empty()) {
        return 0;
    }
    uint64_t n = 1;
    for (uint64_t d : shape) {
        n *= d;
    }
    return n;
}

uint64_t QuantizedTensor::n_blocks() const {
    const FormatInfo& info = format_info(format);
    return n_elements() / info.block_len;
}

std::vector<uint8_t> quantize_payload(std::span<const float> values,
                                      const std::vector<uint64_t>& shape,
                                      Format fmt, int threads) {
    const uint64_t n = shape_elements(shape);
    if (values.size() != n) {
        throw std::invalid_argument("value count " +
                                    std::to_string(values.size()) +
                                    " does not match shape (" +
                                    std::to_string(n) + " elements)");
    }
    const FormatInfo& info = format_info(fmt);
    const uint64_t row = shape.back();
    if (row % info.block_len != 0) {
        throw std::invalid_argument(
            "row not block-aligned: row length " + std::to_string(row) +
            " is not a multiple of " + std::to_string(info.block_len) + " (" +
            info.name + ")");
    }
    for (uint64_t i = 0; i < n; ++i) {
        if (!std::isfinite(values[i])) {
            throw std::invalid_argument("non-finite weight at index " +
                                        std::to_string(i));
        }
    }
    if (fmt == Format::F32) {
        std::vector<uint8_t> payload(n * 4);
        std::memcpy(payload.data(), values.data(), payload.size());
        return payload;
    }
    if (fmt == Format::F16) {
        std::vector<uint8_t> payload(n * 2);
        parallel_chunks(n, threads, [&](uint64_t begin, uint64_t end) {
            for (uint64_t i = begin; i < end; ++i) {
                put_le16(payload.data() + i * 2, f32_to_f16(values[i]));
            }
        });
        return payload;
    }
    const uint64_t blocks = n / info.block_len;
    std::vector<uint8_t> payload(blocks * info.block_bytes);
    parallel_chunks(blocks, threads, [&](uint64_t begin, uint64_t end) {
        block_encoding e;
        for (uint64_t b = begin; b < end; ++b) {
            encode_block_core(values.data() + b * info.block_len, fmt, e);
            pack_encoding(e, fmt, payload.data() + b * info.block_bytes);
        }
    });
    return payload;
}

std::vector<float> dequantize_payload(std::span<const uint8_t> payload,
                                      const std::vector<uint64_t>& shape,
                                      Format fmt, int threads) {
    const uint64_t n = shape_elements(shape);
    const FormatInfo& info = format_info(fmt);
    const uint64_t row = shape.back();
    if (row % info.block_len != 0) {
        throw std::invalid_argument(
            "row not block-aligned: row length " + std::to_string(row) +
            " is not a multiple of " + std::to_string(info.block_len) + " (" +
            info.name + ")");
    }
    const uint64_t blocks = n / info.block_len;
    if (payload.size() != blocks * info.block_bytes) {
        throw std::invalid_argument(
            "payload size " + std::to_string(payload.size()) +
            " does not match " + std::to_string(blocks) + " " + info.name +
            " blocks (" + std::to_string(blocks * info.block_bytes) +
            " bytes)");
    }
    std::vector<float> out(n);
    if (fmt == Format::F32) {
        std::memcpy(out.data(), payload.data(), payload.size());
        return out;
    }
    if (fmt == Format::F16) {
        parallel_chunks(n, threads, [&](uint64_t begin, uint64_t end) {
            for (uint64_t i = begin; i < end; ++i) {
                out[i] = f16_to_f32(get_le16(payload.data() + i * 2));
            }
        });
        return out;
    }
    parallel_chunks(blocks, threads, [&](uint64_t begin, uint64_t end) {
        for (uint64_t b = begin; b < end; ++b) {
            decode_block_core(payload.data() + b * info.block_bytes, fmt,
                              out.data() + b * info.block_len);
        }
    });
    return out;
}

QuantizedTensor quantize_tensor(std::span<const float> values,
                                std::vector<uint64_t> shape, Format fmt,
                                int threads) {
    QuantizedTensor t;
    t.payload = quantize_payload(values, shape, fmt, threads);
    t.format = fmt;
    t.shape = std::move(shape);
    return t;
}

std::vector<float> dequantize_tensor(const QuantizedTensor& t, int threads) {
    return dequantize_payload(t.payload, t.shape, t.format, threads);
}

}  // namespace kqf
