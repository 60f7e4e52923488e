// planning and deployment-report cost on the full production architecture

#include <benchmark/benchmark.h>

#include <string>

#include "kqf/arch.hpp"
#include "kqf/estimate.hpp"
#include "kqf/plan.hpp"
#include "kqf/recipe.hpp"

namespace {

const kqf::ModelArch& reference_arch() {
    static const kqf::ModelArch arch = kqf::ModelArch::from_json_file(
        std::string(KQF_CONFIG_DIR "/deepseek-v3.json"));
    return arch;
}

void bm_enumerate_tensors(benchmark::State& state) {
    const kqf::ModelArch& arch = reference_arch();
    for (auto _ : state) {
        auto specs = arch.enumerate_tensors();
        benchmark::DoNotOptimize(specs.data());
    }
}

void bm_plan_allocation(benchmark::State& state, const char* recipe) {
    const kqf::ModelArch& arch = reference_arch();
    const kqf::QuantRecipe* r = kqf::find_builtin_recipe(recipe);
    for (auto _ : state) {
        auto plan = kqf::plan_allocation(arch, *r);
        benchmark::DoNotOptimize(plan.entries.data());
    }
}

void bm_deployment_report(benchmark::State& state, const char* recipe) {
    const kqf::ModelArch& arch = reference_arch();
    const auto plan =
        kqf::plan_allocation(arch, *kqf::find_builtin_recipe(recipe));
    const auto overhead = kqf::OverheadModel::calibrated(arch);
    const auto devices = kqf::DeviceProfile::builtin_profiles();
    for (auto _ : state) {
        auto rep = kqf::report(plan, arch, 32768, overhead, devices, 8);
        benchmark::DoNotOptimize(rep.tensors.data());
    }
}

}  // namespace

BENCHMARK(bm_enumerate_tensors);
BENCHMARK_CAPTURE(bm_plan_allocation, q4_k_m, "Q4_K_M");
BENCHMARK_CAPTURE(bm_plan_allocation, dq3_k_m, "DQ3_K_M");
BENCHMARK_CAPTURE(bm_deployment_report, q4_k_m, "Q4_K_M");
BENCHMARK_CAPTURE(bm_deployment_report, dq3_k_m, "DQ3_K_M");

BENCHMARK_MAIN();
