#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "kqf/arch.hpp"
#include "kqf/estimate.hpp"
#include "kqf/plan.hpp"
#include "kqf/recipe.hpp"
#include "test_util.hpp"

using namespace kqf;

namespace {

constexpr double kGiB = 1073741824.0;

struct PublishedRow {
    const char* recipe;
    double bpw;
    double size_gib;
    uint64_t per_device_gib;
    double mu_gib;
};

// deployment figures for the 671B mixture-of-experts reference model at a
// 32768-token context on an 8-device node
const PublishedRow kPublished[] = {
    {"Q4_K_M", 4.82, 377.0, 71, 568.0},
    {"Q3_K_M", 3.81, 298.0, 61, 487.0},
    {"DQ3_K_M", 3.59, 281.0, 59, 469.0},
    {"Q2_K_L", 2.91, 228.0, 52, 415.0},
    {"UD-Q2_K_XL", 2.70, 212.0, 50, 398.0},
};

ModelArch reference_arch() {
    return ModelArch::from_json_file(tu::config_path("deepseek-v3.json"));
}

DeploymentReport run_report(const ModelArch& arch, const std::string& recipe) {
    const AllocationPlan plan =
        plan_allocation(arch, *find_builtin_recipe(recipe));
    return report(plan, arch, 32768, OverheadModel::calibrated(arch),
                  DeviceProfile::builtin_profiles(), 8);
}

}  // namespace

TEST_CASE("per-tensor byte cost") {
    TensorSpec t{"t", "t", -1, {2, 256}};
    CHECK(tensor_bytes(t, Format::F32) == 2048);
    CHECK(tensor_bytes(t, Format::F16) == 1024);
    CHECK(tensor_bytes(t, Format::Q4_K) == 2 * 144);
    CHECK(tensor_bytes(t, Format::Q6_K) == 2 * 210);
    CHECK(tensor_bytes(t, Format::Q8_0) == 16 * 34);

    TensorSpec q8_rows{"t", "t", -1, {1, 64}};
    CHECK(tensor_bytes(q8_rows, Format::Q8_0) == 2 * 34);

    TensorSpec odd{"t", "t", -1, {4, 100}};
    CHECK_THROWS_WITH_AS(tensor_bytes(odd, Format::Q4_K),
                         doctest::Contains("not block-aligned"),
                         std::invalid_argument);

    TensorSpec empty{"t", "t", -1, {}};
    CHECK_THROWS_AS(tensor_bytes(empty, Format::F32), std::invalid_argument);
}

TEST_CASE("block formats carry the expected bits per weight") {
    CHECK(bits_per_weight(Format::Q2_K) == doctest::Approx(2.625));
    CHECK(bits_per_weight(Format::Q3_K) == doctest::Approx(3.4375));
    CHECK(bits_per_weight(Format::Q4_K) == doctest::Approx(4.5));
    CHECK(bits_per_weight(Format::Q5_K) == doctest::Approx(5.5));
    CHECK(bits_per_weight(Format::Q6_K) == doctest::Approx(6.5625));
    CHECK(bits_per_weight(Format::Q8_0) == doctest::Approx(8.5));
    CHECK(bits_per_weight(Format::F16) == doctest::Approx(16.0));
    CHECK(bits_per_weight(Format::F32) == doctest::Approx(32.0));
}

TEST_CASE("the reference architecture sizes to 671B parameters") {
    const ModelArch arch = reference_arch();
    CHECK(arch.n_moe_layers() == 58);
    uint64_t total = 0;
    for (const TensorSpec& t : arch.enumerate_tensors()) {
        total += t.n_elements();
    }
    CHECK(arch.total_params() == total);
    CHECK(arch.total_params() == 671026419200ULL);
}

TEST_CASE("overhead model calibration") {
    const ModelArch arch = reference_arch();
    const OverheadModel m = OverheadModel::calibrated(arch);
    // per-token term: compressed kv + rope key, two bytes each
    CHECK(m.c1 == 61.0 * (512 + 64) * 2);
    CHECK(m.bytes_at(32768) == 188ULL * 1073741824ULL);
    CHECK(m.bytes_at(0) == static_cast<uint64_t>(m.c0));
    CHECK(m.bytes_at(65536) > m.bytes_at(32768));
}

TEST_CASE("deployment table for the reference model matches published rows") {
    const ModelArch arch = reference_arch();
    const auto start = std::chrono::steady_clock::now();
    for (const PublishedRow& row : kPublished) {
        INFO("recipe " << row.recipe);
        const DeploymentReport rep = run_report(arch, row.recipe);
        CHECK(rep.total_params == arch.total_params());
        CHECK(std::fabs(rep.avg_bpw - row.bpw) <= 0.08);
        const double size_gib = static_cast<double>(rep.weight_bytes) / kGiB;
        CHECK(std::fabs(size_gib - row.size_gib) <= 0.02 * row.size_gib);
        CHECK(ceil_gib(rep.per_device_bytes) == row.per_device_gib);
        const double mu_gib = static_cast<double>(rep.mu_total_bytes) / kGiB;
        CHECK(std::fabs(mu_gib - row.mu_gib) <= 4.0);
        CHECK(rep.overhead_bytes == 188ULL * 1073741824ULL);
        CHECK(rep.mu_total_bytes == rep.weight_bytes + rep.overhead_bytes);
        CHECK(rep.per_device_bytes ==
              (rep.mu_total_bytes + rep.n_devices - 1) / rep.n_devices);
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    CHECK(elapsed < 1.0);
}

TEST_CASE("device fit verdicts split the recipes at the 64 GiB node") {
    const ModelArch arch = reference_arch();
    std::map<std::string, std::map<std::string, bool>> verdicts;
    for (const PublishedRow& row : kPublished) {
        const DeploymentReport rep = run_report(arch, row.recipe);
        for (const FitVerdict& v : rep.fits) {
            verdicts[rep.recipe_name][v.device] = v.fits;
        }
    }
    CHECK(verdicts["Q4_K_M"]["8x80GB"] == true);
    CHECK(verdicts["Q4_K_M"]["8x64GB"] == false);
    CHECK(verdicts["DQ3_K_M"]["8x80GB"] == true);
    CHECK(verdicts["DQ3_K_M"]["8x64GB"] == true);
    CHECK(verdicts["Q3_K_M"]["8x64GB"] == true);
    CHECK(verdicts["Q2_K_L"]["8x64GB"] == true);
    CHECK(verdicts["Q2_K_XL"]["8x64GB"] == true);
}

TEST_CASE("a device holding exactly the per-device bytes fits with margin 0") {
    const ModelArch arch = reference_arch();
    const DeploymentReport base = run_report(arch, "DQ3_K_M");
    DeviceProfile exact;
    exact.name = "exact";
    exact.memory_bytes = base.per_device_bytes;
    exact.devices_per_node = 8;
    const auto fits = fit_matrix(base, {exact});
    REQUIRE(fits.size() == 1);
    CHECK(fits[0].fits);
    CHECK(fits[0].margin_bytes == 0);

    DeviceProfile small = exact;
    small.name = "short";
    small.memory_bytes = base.per_device_bytes - 1;
    const auto tight = fit_matrix(base, {small});
    CHECK_FALSE(tight[0].fits);
    CHECK(tight[0].margin_bytes == -1);
}

TEST_CASE("device profile parsing") {
    const DeviceProfile p = DeviceProfile::parse("8x80GB");
    CHECK(p.name == "8x80GB");
    CHECK(p.memory_bytes == 80ULL * 1073741824ULL);
    CHECK(p.devices_per_node == 8);

    const DeviceProfile q = DeviceProfile::parse("16x192GB");
    CHECK(q.memory_bytes == 192ULL * 1073741824ULL);
    CHECK(q.devices_per_node == 16);

    CHECK_THROWS_AS(DeviceProfile::parse("80GB"), std::invalid_argument);
    CHECK_THROWS_AS(DeviceProfile::parse("8x"), std::invalid_argument);
    CHECK_THROWS_AS(DeviceProfile::parse(""), std::invalid_argument);

    const auto builtins = DeviceProfile::builtin_profiles();
    REQUIRE(builtins.size() == 2);
    CHECK(builtins[0].name == "8x80GB");
    CHECK(builtins[1].name == "8x64GB");

    const auto file =
        DeviceProfile::from_json_file(tu::config_path("devices.json"));
    REQUIRE(file.size() == 4);
    CHECK(file[0].name == "8x80GB");
    CHECK(file[2].memory_bytes == 48ULL * 1073741824ULL);
}

TEST_CASE("ceiling GiB") {
    CHECK(ceil_gib(0) == 0);
    CHECK(ceil_gib(1) == 1);
    CHECK(ceil_gib(1073741824ULL) == 1);
    CHECK(ceil_gib(1073741825ULL) == 2);
    CHECK(ceil_gib(59ULL * 1073741824ULL) == 59);
}

TEST_CASE("report JSON carries the fit verdicts and histogram inputs") {
    const ModelArch arch = reference_arch();
    const DeploymentReport rep = run_report(arch, "DQ3_K_M");
    const nlohmann::json j = nlohmann::json::parse(rep.to_json());
    CHECK(j.at("recipe") == "DQ3_K_M");
    CHECK(j.at("arch") == "deepseek-v3");
    CHECK(j.at("per_device_gib_ceil") == 59);
    CHECK(j.at("fits").size() == 2);
    CHECK(j.at("tensors").size() == rep.tensors.size());
    uint64_t bytes = 0;
    for (const auto& t : j.at("tensors")) {
        bytes += t.at("bytes").get<uint64_t>();
    }
    CHECK(bytes == rep.weight_bytes);
}
