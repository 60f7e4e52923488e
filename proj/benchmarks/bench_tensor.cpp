// whole-tensor payload quantization throughput, single and multi threaded

#include <benchmark/benchmark.h>

#include <random>
#include <span>
#include <vector>

#include "kqf/formats.hpp"
#include "kqf/kquant.hpp"

namespace {

std::vector<float> seeded_tensor(uint64_t seed, size_t n) {
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

constexpr uint64_t kRows = 32;
constexpr uint64_t kCols = 2048;

void bm_quantize_tensor(benchmark::State& state, kqf::Format fmt) {
    const std::vector<uint64_t> shape = {kRows, kCols};
    const std::vector<float> input = seeded_tensor(11, kRows * kCols);
    const int threads = static_cast<int>(state.range(0));
    for (auto _ : state) {
        auto payload = kqf::quantize_payload(
            std::span<const float>(input.data(), input.size()), shape, fmt,
            threads);
        benchmark::DoNotOptimize(payload.data());
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(input.size()) *
                            sizeof(float));
}

void bm_dequantize_tensor(benchmark::State& state, kqf::Format fmt) {
    const std::vector<uint64_t> shape = {kRows, kCols};
    const std::vector<float> input = seeded_tensor(11, kRows * kCols);
    const auto payload = kqf::quantize_payload(
        std::span<const float>(input.data(), input.size()), shape, fmt, 0);
    const int threads = static_cast<int>(state.range(0));
    for (auto _ : state) {
        auto out = kqf::dequantize_payload(payload, shape, fmt, threads);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(input.size()) *
                            sizeof(float));
}

}  // namespace

BENCHMARK_CAPTURE(bm_quantize_tensor, q2_k, kqf::Format::Q2_K)->Arg(1)->Arg(4);
BENCHMARK_CAPTURE(bm_quantize_tensor, q3_k, kqf::Format::Q3_K)->Arg(1)->Arg(4);
BENCHMARK_CAPTURE(bm_quantize_tensor, q4_k, kqf::Format::Q4_K)->Arg(1)->Arg(4);
BENCHMARK_CAPTURE(bm_quantize_tensor, q6_k, kqf::Format::Q6_K)->Arg(1)->Arg(4);
BENCHMARK_CAPTURE(bm_quantize_tensor, q8_0, kqf::Format::Q8_0)->Arg(1)->Arg(4);
BENCHMARK_CAPTURE(bm_quantize_tensor, f16, kqf::Format::F16)->Arg(1)->Arg(4);

BENCHMARK_CAPTURE(bm_dequantize_tensor, q4_k, kqf::Format::Q4_K)
    ->Arg(1)
    ->Arg(4);
BENCHMARK_CAPTURE(bm_dequantize_tensor, q6_k, kqf::Format::Q6_K)
    ->Arg(1)
    ->Arg(4);

BENCHMARK_MAIN();
