#include "mipkd/checkpoint.hpp"

#include <cstdint>
#include <fstream>

#include <nlohmann/json.hpp>

namespace mipkd {

namespace {

constexpr char kMagic[] = "MPKD1\n";

template <typename T>
void write_pod(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 6);
    const std::string manifest = ckpt.manifest.dump();
    write_pod<uint64_t>(os, manifest.size());
    os.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    write_pod<uint64_t>(os, ckpt.tensors.size());
    for (const auto& [name, t0] : ckpt.tensors) {
        auto t = t0.to(torch::kFloat32).contiguous();
        write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<uint32_t>(os, static_cast<uint32_t>(t.dim()));
        for (int64_t d = 0; d < t.dim(); ++d) write_pod<int64_t>(os, t.size(d));
        os.write(reinterpret_cast<const char*>(t.data_ptr<float>()),
                 static_cast<std::streamsize>(t.numel() * sizeof(float)));
    }
    if (!os) throw ConfigError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open checkpoint: " + path);
    char magic[6];
    is.read(magic, 6);
    if (!is || std::string(magic, 6) != kMagic) throw ConfigError("bad checkpoint magic: " + path);
    Checkpoint ckpt;
    const auto mlen = read_pod<uint64_t>(is);
    std::string manifest(mlen, '\0');
    is.read(manifest.data(), static_cast<std::streamsize>(mlen));
    ckpt.manifest = nlohmann::json::parse(manifest);
    const auto count = read_pod<uint64_t>(is);
    for (uint64_t i = 0; i < count; ++i) {
        const auto nlen = read_pod<uint32_t>(is);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        const auto ndim = read_pod<uint32_t>(is);
        std::vector<int64_t> dims(ndim);
        for (auto& d : dims) d = read_pod<int64_t>(is);
        auto t = torch::empty(dims, torch::kFloat32);
        is.read(reinterpret_cast<char*>(t.data_ptr<float>()),
                static_cast<std::streamsize>(t.numel() * sizeof(float)));
        ckpt.tensors.emplace(std::move(name), std::move(t));
    }
    if (!is) throw ConfigError("truncated checkpoint: " + path);
    return ckpt;
}

nlohmann::json spec_to_json(const NetworkSpec& spec) {
    return {{"arch", arch_name(spec.arch)},       {"channels", spec.channels},
            {"blocks", spec.blocks},              {"groups", spec.groups},
            {"scale", spec.scale},                {"res_scale", spec.res_scale},
            {"attention_reduction", spec.attention_reduction}};
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
    NetworkSpec s;
    s.arch = arch_from_name(j.at("arch").get<std::string>());
    s.channels = j.at("channels").get<int64_t>();
    s.blocks = j.at("blocks").get<int64_t>();
    s.groups = j.value("groups", int64_t{1});
    s.scale = j.at("scale").get<int64_t>();
    s.res_scale = j.value("res_scale", 0.0);
    s.attention_reduction = j.value("attention_reduction", int64_t{16});
    s.validate();
    return s;
}

Checkpoint model_checkpoint(const SRModel& model, const std::string& role, int64_t iteration,
                            uint64_t seed) {
    Checkpoint ckpt;
    ckpt.manifest = {{"format", "mipkd-checkpoint-v1"},
                     {"kind", "sr_model"},
                     {"spec", spec_to_json(model->spec)},
                     {"role", role},
                     {"iteration", iteration},
                     {"seed", seed}};
    for (const auto& p : model->named_parameters())
        ckpt.tensors.emplace(p.key(), p.value().detach().clone());
    return ckpt;
}

void save_model(const std::string& path, const SRModel& model, const std::string& role,
                int64_t iteration, uint64_t seed) {
    save_checkpoint(path, model_checkpoint(model, role, iteration, seed));
}

SRModel model_from_checkpoint(const Checkpoint& ckpt) {
    auto spec = spec_from_json(ckpt.manifest.at("spec"));
    SRModel model(spec);
    torch::NoGradGuard ng;
    auto params = model->named_parameters();
    for (auto& p : params) {
        auto it = ckpt.tensors.find(p.key());
        if (it == ckpt.tensors.end()) throw ConfigError("checkpoint missing tensor: " + p.key());
        if (!p.value().sizes().equals(it->second.sizes()))
            throw DimensionError("checkpoint tensor shape mismatch: " + p.key());
        p.value().copy_(it->second);
    }
    if (params.size() != ckpt.tensors.size())
        throw ConfigError("checkpoint tensor count does not match model");
    return model;
}

SRModel load_model(const std::string& path) { return model_from_checkpoint(load_checkpoint(path)); }

void save_module(const std::string& path, const torch::nn::Module& module,
                 const nlohmann::json& manifest) {
    Checkpoint ckpt;
    ckpt.manifest = manifest;
    for (const auto& p : module.named_parameters())
        ckpt.tensors.emplace(p.key(), p.value().detach().clone());
    save_checkpoint(path, ckpt);
}

void load_into_module(const std::string& path, torch::nn::Module& module) {
    auto ckpt = load_checkpoint(path);
    torch::NoGradGuard ng;
    for (auto& p : module.named_parameters()) {
        auto it = ckpt.tensors.find(p.key());
        if (it == ckpt.tensors.end()) throw ConfigError("checkpoint missing tensor: " + p.key());
        p.value().copy_(it->second);
    }
}

}  // namespace mipkd
