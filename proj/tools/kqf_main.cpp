// kqf: weights-only quantization toolkit
//   quantize  re-encode a model file per a recipe
//   plan      resolve recipe x architecture into per-tensor formats
//   estimate  deployment size / memory / device fit report
//   inspect   dump a model file's metadata and tensor directory
//   analyze   per-tensor reconstruction error of a recipe on real weights
//   compare   diff two analyze reports

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kqf/analysis.hpp"
#include "kqf/arch.hpp"
#include "kqf/estimate.hpp"
#include "kqf/formats.hpp"
#include "kqf/gguf.hpp"
#include "kqf/kquant.hpp"
#include "kqf/plan.hpp"
#include "kqf/recipe.hpp"

namespace {

using nlohmann::json;
using namespace kqf;

// argument combinations that cannot be acted on (exit code 2, vs 1 for
// failures while doing the work)
struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_stdin() {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// text outputs go through a temp file + rename so a failure never leaves a
// partial file behind
void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot create " + tmp);
        }
        out << content;
        out.flush();
        if (!out) {
            std::remove(tmp.c_str());
            throw std::runtime_error("write error on " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw std::runtime_error("cannot move output into place: " + path);
    }
}

QuantRecipe resolve_recipe(const std::string& spec) {
    if (const QuantRecipe* r = find_builtin_recipe(spec)) {
        return *r;
    }
    if (std::filesystem::exists(spec)) {
        return QuantRecipe::from_json_file(spec);
    }
    std::string names;
    for (const QuantRecipe& r : builtin_recipes()) {
        names += names.empty() ? r.name : ", " + r.name;
    }
    throw usage_error("unknown recipe '" + spec +
                      "' (not a built-in recipe or a file; built-ins: " +
                      names + ")");
}

std::vector<DeviceProfile> resolve_devices(const std::string& spec) {
    if (spec.empty()) {
        return DeviceProfile::builtin_profiles();
    }
    if (std::filesystem::exists(spec)) {
        return DeviceProfile::from_json_file(spec);
    }
    std::vector<DeviceProfile> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) {
            continue;
        }
        try {
            out.push_back(DeviceProfile::parse(item));
        } catch (const std::invalid_argument& e) {
            throw usage_error(e.what());
        }
    }
    if (out.empty()) {
        throw usage_error("no device profiles in '" + spec + "'");
    }
    return out;
}

AllocationPlan load_plan(const std::string& spec) {
    if (spec == "-") {
        return AllocationPlan::from_json(read_stdin());
    }
    return AllocationPlan::from_json_file(spec);
}

std::vector<TensorSpec> specs_from_container(const ContainerFile& model) {
    std::vector<TensorSpec> specs;
    specs.reserve(model.tensors.size());
    for (const TensorEntry& t : model.tensors) {
        TensorSpec s;
        s.name = t.name;
        s.role = role_from_tensor_name(t.name);
        s.layer = layer_from_tensor_name(t.name);
        s.shape.assign(t.ne.rbegin(), t.ne.rend());
        specs.push_back(std::move(s));
    }
    return specs;
}

std::string container_arch_name(const ContainerFile& model) {
    if (const GgufValue* v = model.find_meta("general.architecture")) {
        return v->as_string();
    }
    return "";
}

// ---------------------------------------------------------------------------

int cmd_quantize(const std::string& model_path, const std::string& recipe_spec,
                 const std::string& out_path, int threads) {
    ContainerFile model = read_container(model_path);
    const QuantRecipe recipe = resolve_recipe(recipe_spec);
    const AllocationPlan plan = plan_for_tensors(
        specs_from_container(model), recipe, container_arch_name(model));

    std::map<Format, std::pair<uint64_t, uint64_t>> histogram;  // count, bytes
    for (TensorEntry& t : model.tensors) {
        const PlanEntry* e = plan.find(t.name);
        if (e == nullptr) {
            throw std::runtime_error("no plan entry for tensor " + t.name);
        }
        const Format target = e->format;
        if (target != t.format) {
            if (t.format != Format::F32) {
                throw std::runtime_error(
                    "cannot requantize tensor " + t.name + " from " +
                    format_name(t.format) + "; sources must be f32");
            }
            const float* x = reinterpret_cast<const float*>(t.data.data());
            const std::vector<uint64_t> shape(t.ne.rbegin(), t.ne.rend());
            t.data = quantize_payload(
                std::span<const float>(x, t.n_elements()), shape, target,
                threads);
            t.format = target;
        }
        auto& [count, bytes] = histogram[t.format];
        ++count;
        bytes += t.data.size();
    }
    model.set_meta("general.quantization_version", GgufValue::make_u32(2));
    model.set_meta("kqf.recipe", GgufValue::make_string(recipe.name));

    const std::string tmp = out_path + ".tmp";
    try {
        write_container(model, tmp);
        if (std::rename(tmp.c_str(), out_path.c_str()) != 0) {
            throw std::runtime_error("cannot move output into place: " +
                                     out_path);
        }
    } catch (...) {
        std::remove(tmp.c_str());
        throw;
    }

    uint64_t total_bytes = 0;
    std::cout << "format  tensors  bytes\n";
    for (const auto& [fmt, cb] : histogram) {
        std::cout << format_name(fmt) << "  " << cb.first << "  " << cb.second
                  << "\n";
        total_bytes += cb.second;
    }
    std::cout << "wrote " << out_path << " (" << total_bytes
              << " tensor data bytes, recipe " << recipe.name << ")\n";
    return 0;
}

int cmd_plan(const std::string& arch_path, const std::string& recipe_spec,
             bool as_json, const std::string& out_path) {
    const ModelArch arch = ModelArch::from_json_file(arch_path);
    const QuantRecipe recipe = resolve_recipe(recipe_spec);
    const AllocationPlan plan = plan_allocation(arch, recipe);
    if (as_json) {
        write_output(out_path, plan.to_json());
        return 0;
    }
    std::ostringstream out;
    out << "recipe " << plan.recipe_name << "\n";
    out << "arch   " << plan.arch_name << "\n";
    // role -> format -> layer list
    std::map<std::string, std::map<Format, std::vector<int>>> by_role;
    uint64_t fallbacks = 0;
    for (const PlanEntry& e : plan.entries) {
        by_role[e.spec.role][e.format].push_back(e.spec.layer);
        if (e.fallback_applied) {
            ++fallbacks;
        }
    }
    for (const auto& [role, formats] : by_role) {
        out << role << ":";
        for (const auto& [fmt, layers] : formats) {
            out << " " << format_name(fmt) << " x" << layers.size();
        }
        out << "\n";
    }
    out << plan.entries.size() << " tensors, " << fallbacks
        << " fallback(s)\n";
    write_output(out_path, out.str());
    return 0;
}

int cmd_estimate(const std::string& arch_path, const std::string& plan_spec,
                 const std::string& recipe_spec, uint64_t context,
                 const std::string& devices_spec, uint32_t n_devices,
                 bool as_json, const std::string& out_path) {
    const ModelArch arch = ModelArch::from_json_file(arch_path);
    AllocationPlan plan;
    if (!plan_spec.empty()) {
        plan = load_plan(plan_spec);
        if (!plan.arch_name.empty() && plan.arch_name != arch.name) {
            throw std::runtime_error("plan was computed for arch '" +
                                     plan.arch_name + "', not '" + arch.name +
                                     "'");
        }
    } else if (!recipe_spec.empty()) {
        plan = plan_allocation(arch, resolve_recipe(recipe_spec));
    } else {
        throw usage_error("estimate needs --plan or --recipe");
    }
    const OverheadModel overhead = OverheadModel::calibrated(arch);
    const std::vector<DeviceProfile> devices = resolve_devices(devices_spec);
    const DeploymentReport rep =
        report(plan, arch, context, overhead, devices, n_devices);
    write_output(out_path, as_json ? rep.to_json() : rep.to_table());
    return 0;
}

json value_to_json(const GgufValue& v) {
    switch (v.type) {
        case GgufType::U8:
        case GgufType::U16:
        case GgufType::U32:
        case GgufType::U64:
            return v.as_uint();
        case GgufType::I8:
        case GgufType::I16:
        case GgufType::I32:
        case GgufType::I64:
            return v.as_int();
        case GgufType::F32:
        case GgufType::F64:
            return v.as_float();
        case GgufType::BOOL:
            return v.as_bool();
        case GgufType::STRING:
            return v.as_string();
        case GgufType::ARRAY: {
            json arr = json::array();
            for (const GgufValue& item : v.as_array()) {
                arr.push_back(value_to_json(item));
            }
            return arr;
        }
    }
    return nullptr;
}

int cmd_inspect(const std::string& model_path, bool as_json,
                const std::string& out_path) {
    std::ifstream in(model_path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open model file: " + model_path);
    }
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    const ContainerFile model = read_container_bytes(bytes);

    uint64_t data_size = 0;
    for (const TensorEntry& t : model.tensors) {
        data_size = std::max(data_size, t.offset + t.byte_size());
    }

    if (as_json) {
        json j;
        j["version"] = model.version;
        j["alignment"] = model.alignment;
        j["n_kv"] = model.metadata.size();
        j["n_tensors"] = model.tensors.size();
        json kv = json::array();
        for (const auto& [key, value] : model.metadata) {
            json e;
            e["key"] = key;
            e["type"] = gguf_type_name(value.type);
            if (value.type == GgufType::ARRAY) {
                e["elem_type"] = gguf_type_name(value.elem_type);
            }
            e["value"] = value_to_json(value);
            kv.push_back(std::move(e));
        }
        j["kv"] = std::move(kv);
        json tensors = json::array();
        for (const TensorEntry& t : model.tensors) {
            tensors.push_back({{"name", t.name},
                               {"ne", t.ne},
                               {"type", format_name(t.format)},
                               {"offset", t.offset},
                               {"bytes", t.byte_size()}});
        }
        j["tensors"] = std::move(tensors);
        j["data_offset"] = model.data_offset;
        j["data_size"] = data_size;
        j["file_size"] = bytes.size();
        write_output(out_path, j.dump(2) + "\n");
        return 0;
    }

    std::ostringstream out;
    out << model_path << ": version " << model.version << ", "
        << model.metadata.size() << " kv, " << model.tensors.size()
        << " tensors, alignment " << model.alignment << "\n";
    for (const auto& [key, value] : model.metadata) {
        out << "  " << key << " [" << gguf_type_name(value.type) << "]";
        if (value.type == GgufType::ARRAY) {
            out << " (" << gguf_type_name(value.elem_type) << " x"
                << value.as_array().size() << ")";
        } else {
            out << " = " << value_to_json(value).dump();
        }
        out << "\n";
    }
    for (const TensorEntry& t : model.tensors) {
        out << "  " << t.name << "  " << format_name(t.format) << "  ne=[";
        for (size_t i = 0; i < t.ne.size(); ++i) {
            out << (i ? "," : "") << t.ne[i];
        }
        out << "]  offset=" << t.offset << "  bytes=" << t.byte_size() << "\n";
    }
    out << "data: offset " << model.data_offset << ", size " << data_size
        << ", file " << bytes.size() << " bytes\n";
    write_output(out_path, out.str());
    return 0;
}

int cmd_analyze(const std::string& model_path, const std::string& recipe_spec,
                const std::string& plan_spec, int threads, bool as_json,
                const std::string& out_path) {
    const ContainerFile model = read_container(model_path);
    AllocationPlan plan;
    if (!plan_spec.empty()) {
        plan = load_plan(plan_spec);
    } else if (!recipe_spec.empty()) {
        plan = plan_for_tensors(specs_from_container(model),
                                resolve_recipe(recipe_spec),
                                container_arch_name(model));
    } else {
        throw usage_error("analyze needs --recipe or --plan");
    }
    const ErrorReport rep = analyze(model, plan, threads);
    write_output(out_path, as_json ? rep.to_json() : rep.to_table());
    return 0;
}

int cmd_compare(const std::string& path_a, const std::string& path_b,
                bool as_json, const std::string& out_path) {
    const ErrorReport a = ErrorReport::from_json(read_file(path_a));
    const ErrorReport b = ErrorReport::from_json(read_file(path_b));
    const CompareReport rep = compare(a, b);
    write_output(out_path, as_json ? rep.to_json() : rep.to_table());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"weights-only quantization toolkit"};
    app.require_subcommand(1);

    std::string model_path, recipe_spec, plan_spec, arch_path, out_path;
    std::string devices_spec, path_a, path_b;
    uint64_t context = 32768;
    uint32_t n_devices = 8;
    int threads = 0;
    bool as_json = false;

    CLI::App* quantize = app.add_subcommand("quantize", "re-encode a model");
    quantize->add_option("--model", model_path, "input model file")->required();
    quantize->add_option("--recipe", recipe_spec, "recipe name or JSON file")
        ->required();
    quantize->add_option("-o,--output", out_path, "output model file")
        ->required();
    quantize->add_option("--threads", threads, "worker threads (0 = auto)");

    CLI::App* plan = app.add_subcommand("plan", "resolve per-tensor formats");
    plan->add_option("--arch", arch_path, "architecture JSON file")->required();
    plan->add_option("--recipe", recipe_spec, "recipe name or JSON file")
        ->required();
    plan->add_flag("--json", as_json, "emit full plan as JSON");
    plan->add_option("-o,--output", out_path, "write to file instead of stdout");

    CLI::App* estimate = app.add_subcommand("estimate", "deployment report");
    estimate->add_option("--arch", arch_path, "architecture JSON file")
        ->required();
    estimate->add_option("--plan", plan_spec, "plan JSON file ('-' = stdin)");
    estimate->add_option("--recipe", recipe_spec, "recipe name or JSON file");
    estimate->add_option("--context", context, "context length in tokens");
    estimate->add_option("--devices", devices_spec,
                         "device profiles: NxMGB[,NxMGB...] or JSON file");
    estimate->add_option("--n-devices", n_devices, "devices sharing the model");
    estimate->add_flag("--json", as_json, "emit report as JSON");
    estimate->add_option("-o,--output", out_path,
                         "write to file instead of stdout");

    CLI::App* inspect = app.add_subcommand("inspect", "dump a model file");
    inspect->add_option("model", model_path, "model file")->required();
    inspect->add_flag("--json", as_json, "emit directory as JSON");
    inspect->add_option("-o,--output", out_path,
                        "write to file instead of stdout");

    CLI::App* analyze = app.add_subcommand("analyze", "reconstruction error");
    analyze->add_option("--model", model_path, "f32 model file")->required();
    analyze->add_option("--recipe", recipe_spec, "recipe name or JSON file");
    analyze->add_option("--plan", plan_spec, "plan JSON file ('-' = stdin)");
    analyze->add_option("--threads", threads, "worker threads (0 = auto)");
    analyze->add_flag("--json", as_json, "emit report as JSON");
    analyze->add_option("-o,--output", out_path,
                        "write to file instead of stdout");

    CLI::App* comp = app.add_subcommand("compare", "diff two analyze reports");
    comp->add_option("report_a", path_a, "first analyze --json report")
        ->required();
    comp->add_option("report_b", path_b, "second analyze --json report")
        ->required();
    comp->add_flag("--json", as_json, "emit diff as JSON");
    comp->add_option("-o,--output", out_path,
                     "write to file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);  // --help and friends
        }
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (quantize->parsed()) {
            return cmd_quantize(model_path, recipe_spec, out_path, threads);
        }
        if (plan->parsed()) {
            return cmd_plan(arch_path, recipe_spec, as_json, out_path);
        }
        if (estimate->parsed()) {
            return cmd_estimate(arch_path, plan_spec, recipe_spec, context,
                                devices_spec, n_devices, as_json, out_path);
        }
        if (inspect->parsed()) {
            return cmd_inspect(model_path, as_json, out_path);
        }
        if (analyze->parsed()) {
            return cmd_analyze(model_path, recipe_spec, plan_spec, threads,
                               as_json, out_path);
        }
        if (comp->parsed()) {
            return cmd_compare(path_a, path_b, as_json, out_path);
        }
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
