#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kqf/formats.hpp"

namespace kqf {

// Fitted super-block parameters before packing. quants holds the stored
// integer per element: unsigned levels for asymmetric formats, centered
// values for symmetric ones (q3_k in [-4,3], q6_k in [-32,31], q8_0 in
// [-128,127]).
struct BlockParams {
    uint16_t d_bits = 0;     // super scale, half bits
    uint16_t dmin_bits = 0;  // super min-scale, half bits (asymmetric only)
    std::vector<int> sub_scales;
    std::vector<int> sub_mins;  // asymmetric only
    std::vector<int> quants;
    double sq_err = 0.0;  // squared reconstruction error of this encoding
};

// Least-squares block fitting: per-sub-block 15-step grid search over the
// scale (and offset for asymmetric formats) around the max/min-derived
// initialization, round-half-to-even, uniform error weights; the whole-block
// result never has higher error than the naive initialization.
//
// Throws std::invalid_argument("non-finite weight at index ...") on NaN/inf
// and std::invalid_argument on wrong input length.
BlockParams fit_block_params(std::span<const float> values, Format fmt);

// Packs fit_block_params output into the interchange byte layout.
// out must hold block_bytes bytes.
void quantize_block(std::span<const float> values, Format fmt, uint8_t* out);

// Exact reconstruction of an encoded block; rejects wrong-size input with
// std::invalid_argument.
void dequantize_block(std::span<const uint8_t> block, Format fmt, float* out);

struct QuantizedTensor {
    Format format = Format::F32;
    std::vector<uint64_t> shape;  // row-major; shape.back() is the row length
    std::vector<uint8_t> payload;

    uint64_t n_elements() const;
    uint64_t n_blocks() const;
};

// Blocks laid out row-major. Parallelized over blocks; output bytes are
// identical for any thread count. threads <= 0 selects the default
// (KQF_THREADS environment variable, else hardware concurrency).
//
// Throws std::invalid_argument("row not block-aligned ...") when the row
// length is not divisible by the format block length.
QuantizedTensor quantize_tensor(std::span<const float> values,
                                std::vector<uint64_t> shape, Format fmt,
                                int threads = 0);

std::vector<float> dequantize_tensor(const QuantizedTensor& t, int threads = 0);

// Raw-byte variants used when streaming tensors through a container.
std::vector<uint8_t> quantize_payload(std::span<const float> values,
                                      const std::vector<uint64_t>& shape,
                                      Format fmt, int threads = 0);
std::vector<float> dequantize_payload(std::span<const uint8_t> payload,
                                      const std::vector<uint64_t>& shape,
                                      Format fmt, int threads = 0);

}  // namespace kqf
