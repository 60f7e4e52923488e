#include "kqf/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "kqf/kquant.hpp"

namespace kqf {

using nlohmann::json;

namespace {

// compensated accumulation keeps the parameter-weighted aggregate stable no
// matter how many tensors contribute
void kahan_add(double& sum, double& comp, double v) {
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6e", v);
    return buf;
}

}  // namespace

ErrorReport analyze(const ContainerFile& model, const AllocationPlan& plan,
                    int threads) {
    ErrorReport rep;
    rep.recipe_name = plan.recipe_name;
    rep.arch_name = plan.arch_name;
    double num = 0.0, num_c = 0.0;
    double den = 0.0, den_c = 0.0;
    for (const TensorEntry& t : model.tensors) {
        const PlanEntry* entry = plan.find(t.name);
        if (!entry) {
            throw std::runtime_error("unplanned tensor " + t.name);
        }
        if (t.format != Format::F32) {
            throw std::runtime_error(
                "tensor " + t.name +
                " is not f32; analysis needs full-precision sources");
        }
        const uint64_t n = t.n_elements();
        if (entry->spec.n_elements() != n) {
            throw std::runtime_error("plan shape mismatch for tensor " +
                                     t.name);
        }
        const float* x = reinterpret_cast<const float*>(t.data.data());
        const std::vector<uint64_t> shape(t.ne.rbegin(), t.ne.rend());

        TensorErrorRow row;
        row.name = t.name;
        row.role = entry->spec.role;
        row.layer = entry->spec.layer;
        row.format = entry->format;
        row.params = n;

        double se = 0.0;
        double max_abs = 0.0;
        double sx = 0.0;
        if (entry->format == Format::F32) {
            for (uint64_t i = 0; i < n; ++i) {
                const double xi = x[i];
                sx += xi * xi;
            }
        } else {
            const std::vector<uint8_t> payload = quantize_payload(
                std::span<const float>(x, n), shape, entry->format, threads);
            const std::vector<float> xhat =
                dequantize_payload(payload, shape, entry->format, threads);
            for (uint64_t i = 0; i < n; ++i) {
                const double xi = x[i];
                const double d = xi - static_cast<double>(xhat[i]);
                se += d * d;
                const double a = std::fabs(d);
                if (a > max_abs) {
                    max_abs = a;
                }
                sx += xi * xi;
            }
        }
        row.rmse = std::sqrt(se / static_cast<double>(n));
        row.max_abs_err = max_abs;
        row.zero_norm = sx == 0.0;
        row.rel_fro_err = row.zero_norm ? 0.0 : std::sqrt(se) / std::sqrt(sx);
        rep.total_params += n;
        if (!row.zero_norm) {
            kahan_add(num, num_c,
                      static_cast<double>(row.params) * row.rel_fro_err);
            kahan_add(den, den_c, static_cast<double>(row.params));
        }
        rep.rows.push_back(std::move(row));
    }
    rep.aggregate_rel_err = den > 0.0 ? num / den : 0.0;
    return rep;
}

std::string ErrorReport::to_json() const {
    json j;
    j["recipe"] = recipe_name;
    j["arch"] = arch_name;
    j["total_params"] = total_params;
    j["aggregate_rel_err"] = aggregate_rel_err;
    json rows_j = json::array();
    for (const TensorErrorRow& r : rows) {
        rows_j.push_back({{"name", r.name},
                          {"role", r.role},
                          {"layer", r.layer},
                          {"format", format_name(r.format)},
                          {"params", r.params},
                          {"rmse", r.rmse},
                          {"max_abs_err", r.max_abs_err},
                          {"rel_fro_err", r.rel_fro_err},
                          {"zero_norm", r.zero_norm}});
    }
    j["tensors"] = std::move(rows_j);
    return j.dump(2) + "\n";
}

ErrorReport ErrorReport::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(
            std::string("error report is not valid JSON: ") + e.what());
    }
    ErrorReport rep;
    rep.recipe_name = j.value("recipe", "");
    rep.arch_name = j.value("arch", "");
    rep.total_params = j.value("total_params", uint64_t{0});
    rep.aggregate_rel_err = j.value("aggregate_rel_err", 0.0);
    if (!j.contains("tensors")) {
        throw std::invalid_argument("error report missing tensors array");
    }
    for (const json& rj : j.at("tensors")) {
        TensorErrorRow r;
        r.name = rj.at("name").get<std::string>();
        r.role = rj.value("role", "");
        r.layer = rj.value("layer", -1);
        r.format = parse_format(rj.at("format").get<std::string>());
        r.params = rj.value("params", uint64_t{0});
        r.rmse = rj.at("rmse").get<double>();
        r.max_abs_err = rj.value("max_abs_err", 0.0);
        r.rel_fro_err = rj.at("rel_fro_err").get<double>();
        r.zero_norm = rj.value("zero_norm", false);
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

ErrorReport ErrorReport::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open error report: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string ErrorReport::to_table() const {
    std::ostringstream out;
    out << "recipe " << recipe_name << ", arch " << arch_name << "\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-40s %-6s %12s %12s %12s\n", "tensor",
                  "format", "rmse", "max_abs", "rel_fro");
    out << buf;
    for (const TensorErrorRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-40s %-6s %12.6e %12.6e %12.6e%s\n",
                      r.name.c_str(), format_name(r.format), r.rmse,
                      r.max_abs_err, r.rel_fro_err,
                      r.zero_norm ? " (zero norm)" : "");
        out << buf;
    }
    out << "aggregate rel err (param-weighted): " << fmt_double(aggregate_rel_err)
        << " over " << total_params << " params\n";
    return out.str();
}

CompareReport compare(const ErrorReport& a, const ErrorReport& b) {
    CompareReport rep;
    rep.name_a = a.recipe_name;
    rep.name_b = b.recipe_name;
    rep.aggregate_a = a.aggregate_rel_err;
    rep.aggregate_b = b.aggregate_rel_err;
    std::map<std::string, const TensorErrorRow*> b_rows;
    for (const TensorErrorRow& r : b.rows) {
        b_rows.emplace(r.name, &r);
    }
    std::map<std::string, bool> b_matched;
    for (const TensorErrorRow& ra : a.rows) {
        auto it = b_rows.find(ra.name);
        if (it == b_rows.end()) {
            rep.only_a.push_back(ra.name);
            continue;
        }
        const TensorErrorRow& rb = *it->second;
        CompareRow row;
        row.name = ra.name;
        row.rmse_a = ra.rmse;
        row.rmse_b = rb.rmse;
        row.rel_a = ra.rel_fro_err;
        row.rel_b = rb.rel_fro_err;
        row.rel_delta = rb.rel_fro_err - ra.rel_fro_err;
        rep.rows.push_back(std::move(row));
        b_matched[ra.name] = true;
    }
    for (const TensorErrorRow& rb : b.rows) {
        if (!b_matched.count(rb.name)) {
            rep.only_b.push_back(rb.name);
        }
    }
    return rep;
}

std::string CompareReport::to_json() const {
    json j;
    j["report_a"] = name_a;
    j["report_b"] = name_b;
    j["aggregate_a"] = aggregate_a;
    j["aggregate_b"] = aggregate_b;
    j["aggregate_delta"] = aggregate_b - aggregate_a;
    json rows_j = json::array();
    for (const CompareRow& r : rows) {
        rows_j.push_back({{"name", r.name},
                          {"rmse_a", r.rmse_a},
                          {"rmse_b", r.rmse_b},
                          {"rel_a", r.rel_a},
                          {"rel_b", r.rel_b},
                          {"rel_delta", r.rel_delta}});
    }
    j["tensors"] = std::move(rows_j);
    j["only_a"] = only_a;
    j["only_b"] = only_b;
    return j.dump(2) + "\n";
}

std::string CompareReport::to_table() const {
    std::ostringstream out;
    out << "A = " << name_a << " (aggregate " << fmt_double(aggregate_a)
        << "), B = " << name_b << " (aggregate " << fmt_double(aggregate_b)
        << ")\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-40s %12s %12s %12s\n", "tensor",
                  "rel_a", "rel_b", "delta");
    out << buf;
    for (const CompareRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-40s %12.6e %12.6e %+12.6e\n",
                      r.name.c_str(), r.rel_a, r.rel_b, r.rel_delta);
        out << buf;
    }
    for (const std::string& n : only_a) {
        out << "only in A: " << n << "\n";
    }
    for (const std::string& n : only_b) {
        out << "only in B: " << n << "\n";
    }
    return out.str();
}

}  // namespace kqf
