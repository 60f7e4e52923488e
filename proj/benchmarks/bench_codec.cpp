// single-block encode/decode throughput per format

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "kqf/formats.hpp"
#include "kqf/kquant.hpp"

namespace {

std::vector<float> seeded_block(uint64_t seed, size_t n) {
    std::mt19937_64 rng(seed);
    std::vector<float> out(n);
    for (size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = 0; k < 12; ++k) {
            acc += static_cast<double>(rng() >> 11) *
                   (1.0 / 9007199254740992.0);
        }
        out[i] = static_cast<float>(acc - 6.0);
    }
    return out;
}

void bm_encode(benchmark::State& state, kqf::Format fmt) {
    const kqf::FormatInfo& info = kqf::format_info(fmt);
    const std::vector<float> input = seeded_block(7, info.block_len);
    std::vector<uint8_t> enc(info.block_bytes);
    for (auto _ : state) {
        kqf::quantize_block(input, fmt, enc.data());
        benchmark::DoNotOptimize(enc.data());
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                            info.block_len * sizeof(float));
}

void bm_decode(benchmark::State& state, kqf::Format fmt) {
    const kqf::FormatInfo& info = kqf::format_info(fmt);
    const std::vector<float> input = seeded_block(7, info.block_len);
    std::vector<uint8_t> enc(info.block_bytes);
    kqf::quantize_block(input, fmt, enc.data());
    std::vector<float> dec(info.block_len);
    for (auto _ : state) {
        kqf::dequantize_block(enc, fmt, dec.data());
        benchmark::DoNotOptimize(dec.data());
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                            info.block_len * sizeof(float));
}

}  // namespace

BENCHMARK_CAPTURE(bm_encode, q2_k, kqf::Format::Q2_K);
BENCHMARK_CAPTURE(bm_encode, q3_k, kqf::Format::Q3_K);
BENCHMARK_CAPTURE(bm_encode, q4_k, kqf::Format::Q4_K);
BENCHMARK_CAPTURE(bm_encode, q5_k, kqf::Format::Q5_K);
BENCHMARK_CAPTURE(bm_encode, q6_k, kqf::Format::Q6_K);
BENCHMARK_CAPTURE(bm_encode, q8_0, kqf::Format::Q8_0);

BENCHMARK_CAPTURE(bm_decode, q2_k, kqf::Format::Q2_K);
BENCHMARK_CAPTURE(bm_decode, q3_k, kqf::Format::Q3_K);
BENCHMARK_CAPTURE(bm_decode, q4_k, kqf::Format::Q4_K);
BENCHMARK_CAPTURE(bm_decode, q5_k, kqf::Format::Q5_K);
BENCHMARK_CAPTURE(bm_decode, q6_k, kqf::Format::Q6_K);
BENCHMARK_CAPTURE(bm_decode, q8_0, kqf::Format::Q8_0);

BENCHMARK_MAIN();
