#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kqf/formats.hpp"
#include "kqf/gguf.hpp"
#include "kqf/plan.hpp"

namespace kqf {

// Per-tensor reconstruction error of a quantization plan applied to float
// weights.
struct TensorErrorRow {
    std::string name;
    std::string role;
    int layer = -1;
    Format format = Format::F32;
    uint64_t params = 0;
    double rmse = 0.0;
    double max_abs_err = 0.0;
    double rel_fro_err = 0.0;  // ||x - x_hat||_F / ||x||_F, 0 for zero tensors
    bool zero_norm = false;    // ||x||_F == 0, relative error undefined
};

struct ErrorReport {
    std::string recipe_name;
    std::string arch_name;
    std::vector<TensorErrorRow> rows;
    // Parameter-weighted mean of rel_fro_err over rows with a nonzero norm.
    double aggregate_rel_err = 0.0;
    uint64_t total_params = 0;

    std::string to_json() const;
    static ErrorReport from_json(const std::string& text);
    static ErrorReport from_json_file(const std::string& path);
    std::string to_table() const;
};

// Quantizes each F32 tensor of the container per the plan and measures the
// reconstruction error, one tensor at a time (peak memory stays at one
// tensor's floats plus its encoding). Tensors absent from the plan raise
// "unplanned tensor <name>". Non-F32 source tensors are rejected.
ErrorReport analyze(const ContainerFile& model, const AllocationPlan& plan,
                    int threads = 0);

struct CompareRow {
    std::string name;
    double rmse_a = 0.0;
    double rmse_b = 0.0;
    double rel_a = 0.0;
    double rel_b = 0.0;
    double rel_delta = 0.0;  // rel_b - rel_a
};

struct CompareReport {
    std::string name_a;
    std::string name_b;
    std::vector<CompareRow> rows;  // tensors present in both reports
    std::vector<std::string> only_a;
    std::vector<std::string> only_b;
    double aggregate_a = 0.0;
    double aggregate_b = 0.0;

    std::string to_json() const;
    std::string to_table() const;
};

CompareReport compare(const ErrorReport& a, const ErrorReport& b);

}  // namespace kqf
