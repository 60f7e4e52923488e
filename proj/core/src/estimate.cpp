#include "kqf/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace kqf {

using nlohmann::json;

namespace {

constexpr uint64_t kGiB = 1ull << 30;

// Total non-weight footprint at the reference 32768-token context. Pinning
// the total (rather than c0 directly) keeps the calibration meaningful for
// any architecture the per-token term is derived from.
constexpr uint64_t kReferenceOverheadBytes = 188 * kGiB;
constexpr uint64_t kReferenceContext = 32768;

}  // namespace

OverheadModel OverheadModel::calibrated(const ModelArch& arch) {
    OverheadModel m;
    // per-token compressed KV cache: one (kv_lora_rank + rope_head_dim)
    // vector of half floats per layer
    m.c1 = static_cast<double>(arch.n_layers) *
           (static_cast<double>(arch.kv_lora_rank) + arch.rope_head_dim) * 2.0;
    m.c0 = static_cast<double>(kReferenceOverheadBytes) -
           m.c1 * static_cast<double>(kReferenceContext);
    if (m.c0 < 0.0) {
        m.c0 = 0.0;
    }
    return m;
}

uint64_t OverheadModel::bytes_at(uint64_t context_len) const {
    const double total = c0 + c1 * static_cast<double>(context_len);
    return total <= 0.0 ? 0 : static_cast<uint64_t>(std::llround(total));
}

DeviceProfile DeviceProfile::parse(const std::string& text) {
    // "8x80GB": devices-per-node x memory-per-device (binary gigabytes)
    size_t x = text.find('x');
    if (x == std::string::npos) {
        x = text.find('X');
    }
    if (x == std::string::npos || x == 0) {
        throw std::invalid_argument("bad device profile (want NxMGB): " + text);
    }
    const std::string left = text.substr(0, x);
    std::string right = text.substr(x + 1);
    for (const char* suffix : {"GiB", "GB", "G"}) {
        const size_t len = std::string(suffix).size();
        if (right.size() > len &&
            right.compare(right.size() - len, len, suffix) == 0) {
            right.resize(right.size() - len);
            break;
        }
    }
    char* end = nullptr;
    const long devices = std::strtol(left.c_str(), &end, 10);
    if (end != left.c_str() + left.size() || devices <= 0) {
        throw std::invalid_argument("bad device count in profile: " + text);
    }
    const long gib = std::strtol(right.c_str(), &end, 10);
    if (end != right.c_str() + right.size() || gib <= 0) {
        throw std::invalid_argument("bad device memory in profile: " + text);
    }
    DeviceProfile p;
    p.name = std::to_string(devices) + "x" + std::to_string(gib) + "GB";
    p.memory_bytes = static_cast<uint64_t>(gib) * kGiB;
    p.devices_per_node = static_cast<uint32_t>(devices);
    return p;
}

std::vector<DeviceProfile> DeviceProfile::builtin_profiles() {
    return {parse("8x80GB"), parse("8x64GB")};
}

std::vector<DeviceProfile> DeviceProfile::from_json_file(
    const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open device inventory: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw std::invalid_argument(
            std::string("device inventory is not valid JSON: ") + e.what());
    }
    std::vector<DeviceProfile> out;
    for (const json& dj : j.at("devices")) {
        DeviceProfile p;
        p.name = dj.at("name").get<std::string>();
        if (dj.contains("memory_bytes")) {
            p.memory_bytes = dj.at("memory_bytes").get<uint64_t>();
        } else {
            p.memory_bytes = dj.at("memory_gib").get<uint64_t>() * kGiB;
        }
        p.devices_per_node = dj.value("devices_per_node", 8u);
        if (p.memory_bytes == 0 || p.devices_per_node == 0) {
            throw std::invalid_argument("bad device profile: " + p.name);
        }
        out.push_back(std::move(p));
    }
    if (out.empty()) {
        throw std::invalid_argument("device inventory lists no devices");
    }
    return out;
}

uint64_t tensor_bytes(const TensorSpec& spec, Format fmt) {
    const uint64_t n = spec.n_elements();
    if (n == 0) {
        throw std::invalid_argument("tensor " + spec.name + " has no elements");
    }
    const FormatInfo& info = format_info(fmt);
    if (spec.row_length() % info.block_len != 0) {
        throw std::invalid_argument(
            "row not block-aligned: tensor " + spec.name + " row length " +
            std::to_string(spec.row_length()) + " is not a multiple of " +
            std::to_string(info.block_len) + " (" + info.name + ")");
    }
    return n / info.block_len * info.block_bytes;
}

uint64_t ceil_gib(uint64_t bytes) { return (bytes + kGiB - 1) / kGiB; }

std::vector<FitVerdict> fit_matrix(const DeploymentReport& rep,
                                   const std::vector<DeviceProfile>& devices) {
    std::vector<FitVerdict> out;
    out.reserve(devices.size());
    for (const DeviceProfile& d : devices) {
        FitVerdict v;
        v.device = d.name;
        v.device_memory_bytes = d.memory_bytes;
        v.fits = rep.per_device_bytes <= d.memory_bytes;
        v.margin_bytes = static_cast<int64_t>(d.memory_bytes) -
                         static_cast<int64_t>(rep.per_device_bytes);
        out.push_back(std::move(v));
    }
    return out;
}

DeploymentReport report(const AllocationPlan& plan, const ModelArch& arch,
                        uint64_t context_len, const OverheadModel& overhead,
                        const std::vector<DeviceProfile>& devices,
                        uint32_t n_devices) {
    if (n_devices == 0) {
        throw std::invalid_argument("n_devices must be >= 1");
    }
    DeploymentReport rep;
    rep.recipe_name = plan.recipe_name;
    rep.arch_name = arch.name;
    rep.context_len = context_len;
    rep.n_devices = n_devices;
    rep.tensors.reserve(plan.entries.size());
    for (const PlanEntry& e : plan.entries) {
        TensorCost c;
        c.name = e.spec.name;
        c.role = e.spec.role;
        c.layer = e.spec.layer;
        c.format = e.format;
        c.params = e.spec.n_elements();
        c.bytes = tensor_bytes(e.spec, e.format);
        rep.total_params += c.params;
        rep.weight_bytes += c.bytes;
        rep.tensors.push_back(std::move(c));
    }
    if (rep.total_params == 0) {
        throw std::invalid_argument("plan covers no parameters");
    }
    rep.avg_bpw = static_cast<double>(rep.weight_bytes) * 8.0 /
                  static_cast<double>(rep.total_params);
    rep.overhead_bytes = overhead.bytes_at(context_len);
    rep.mu_total_bytes = rep.weight_bytes + rep.overhead_bytes;
    rep.per_device_bytes = (rep.mu_total_bytes + n_devices - 1) / n_devices;
    rep.fits = fit_matrix(rep, devices);
    return rep;
}

namespace {

double gib(uint64_t bytes) { return static_cast<double>(bytes) / kGiB; }

std::string fmt_str(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

}  // namespace

std::string DeploymentReport::to_json() const {
    json j;
    j["recipe"] = recipe_name;
    j["arch"] = arch_name;
    j["total_params"] = total_params;
    j["weight_bytes"] = weight_bytes;
    j["weight_gib"] = gib(weight_bytes);
    j["avg_bpw"] = avg_bpw;
    j["context_len"] = context_len;
    j["overhead_bytes"] = overhead_bytes;
    j["mu_total_bytes"] = mu_total_bytes;
    j["mu_total_gib"] = gib(mu_total_bytes);
    j["n_devices"] = n_devices;
    j["per_device_bytes"] = per_device_bytes;
    j["per_device_gib_ceil"] = ceil_gib(per_device_bytes);
    json fits_j = json::array();
    for (const FitVerdict& v : fits) {
        fits_j.push_back({{"device", v.device},
                          {"memory_bytes", v.device_memory_bytes},
                          {"fits", v.fits},
                          {"margin_bytes", v.margin_bytes}});
    }
    j["fits"] = std::move(fits_j);
    json tensors_j = json::array();
    for (const TensorCost& c : tensors) {
        tensors_j.push_back({{"name", c.name},
                             {"role", c.role},
                             {"layer", c.layer},
                             {"format", format_name(c.format)},
                             {"params", c.params},
                             {"bytes", c.bytes}});
    }
    j["tensors"] = std::move(tensors_j);
    return j.dump(2) + "\n";
}

std::string DeploymentReport::to_table() const {
    auto label = [](const std::string& text) {
        return text.size() < 18 ? text + std::string(18 - text.size(), ' ')
                                : text + " ";
    };
    std::ostringstream out;
    out << label("recipe") << recipe_name << "\n";
    out << label("arch") << arch_name << "\n";
    out << label("total params") << total_params << "\n";
    out << label("weights") << weight_bytes << " bytes ("
        << fmt_str("%.2f", gib(weight_bytes)) << " GiB, "
        << fmt_str("%.4f", avg_bpw) << " bpw)\n";
    out << label("context") << context_len << " tokens\n";
    out << label("overhead") << overhead_bytes << " bytes ("
        << fmt_str("%.2f", gib(overhead_bytes)) << " GiB)\n";
    out << label("memory use") << mu_total_bytes << " bytes ("
        << fmt_str("%.2f", gib(mu_total_bytes)) << " GiB)\n";
    out << label("per device (/" + std::to_string(n_devices) + ")")
        << per_device_bytes << " bytes (" << ceil_gib(per_device_bytes)
        << " GiB ceil)\n";
    for (const FitVerdict& v : fits) {
        out << label("device " + v.device)
            << (v.fits ? "fits" : "exceeds") << " (margin "
            << fmt_str("%.2f", static_cast<double>(v.margin_bytes) / kGiB)
            << " GiB)\n";
    }
    // per-format byte histogram
    std::map<Format, uint64_t> by_format;
    for (const TensorCost& c : tensors) {
        by_format[c.format] += c.bytes;
    }
    out << "format histogram:\n";
    for (const auto& [fmt, bytes] : by_format) {
        out << "  " << format_name(fmt) << "  " << bytes << " bytes ("
            << fmt_str("%.2f", gib(bytes)) << " GiB)\n";
    }
    return out.str();
}

}  // namespace kqf
