#include "mipkd/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace mipkd {

std::string method_name(Method m) {
    switch (m) {
        case Method::Scratch: return "scratch";
        case Method::Logits: return "logits";
        case Method::AT: return "at";
        case Method::FitNet: return "fitnet";
        case Method::FAKD: return "fakd";
        default: return "mipkd";
    }
}

Method method_from_name(const std::string& s) {
    if (s == "scratch") return Method::Scratch;
    if (s == "logits") return Method::Logits;
    if (s == "at") return Method::AT;
    if (s == "fitnet") return Method::FitNet;
    if (s == "fakd") return Method::FAKD;
    if (s == "mipkd") return Method::MiPKD;
    throw ConfigError("unknown method: " + s);
}

void TrainConfig::validate() const {
    student_spec.validate();
    if (method != Method::Scratch) {
        teacher_spec.validate();
        if (teacher_ckpt.empty())
            throw ConfigError("method=" + method_name(method) + " requires teacher_ckpt");
        if (teacher_spec.scale != student_spec.scale)
            throw ConfigError("teacher and student scales must match");
    }
    mixer.validate();
    blockmix.validate();
    weights.validate();
    if (iters < 1) throw ConfigError("iters must be >= 1");
    if (lr <= 0) throw ConfigError("lr must be positive");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (n_taps < 1) throw ConfigError("n_taps must be >= 1");
    if (lr_decay_every < 1) throw ConfigError("lr_decay_every must be >= 1");
    if (dataset.scale != student_spec.scale)
        throw ConfigError("dataset scale must match student scale");
}

std::string TrainConfig::run_name() const {
    return method_name(method) + "_" + arch_name(student_spec.arch) + "_" +
           std::to_string(student_spec.scale) + "x_" + std::to_string(seed);
}

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError("unknown config key " + ctx + "." + k);
}

NetworkSpec spec_section(const json& j) {
    check_keys(j, {"arch", "channels", "blocks", "groups", "scale", "res_scale",
                   "attention_reduction"},
               "spec");
    NetworkSpec s;
    s.arch = arch_from_name(j.value("arch", std::string("edsr")));
    s.channels = j.value("channels", int64_t{64});
    s.blocks = j.value("blocks", int64_t{16});
    s.groups = j.value("groups", int64_t{s.arch == Arch::RCAN ? 10 : 1});
    s.scale = j.value("scale", int64_t{4});
    s.res_scale = j.value("res_scale", 0.0);
    s.attention_reduction = j.value("attention_reduction", int64_t{16});
    return s;
}

json spec_section_to_json(const NetworkSpec& s) {
    return {{"arch", arch_name(s.arch)},
            {"channels", s.channels},
            {"blocks", s.blocks},
            {"groups", s.groups},
            {"scale", s.scale},
            {"res_scale", s.res_scale},
            {"attention_reduction", s.attention_reduction}};
}

}  // namespace

TrainConfig config_from_json(const json& j) {
    check_keys(j,
               {"method", "teacher", "student", "teacher_ckpt", "mixer", "blockmix", "weights",
                "n_taps", "optimizer", "lr", "lr_decay_every", "lr_decay_factor", "iters", "batch",
                "seed", "eval_every", "dataset", "eval_dir", "out_dir"},
               "");
    TrainConfig cfg;
    cfg.method = method_from_name(j.value("method", std::string("mipkd")));
    if (j.contains("teacher")) cfg.teacher_spec = spec_section(j.at("teacher"));
    if (j.contains("student")) cfg.student_spec = spec_section(j.at("student"));
    cfg.teacher_ckpt = j.value("teacher_ckpt", std::string());
    if (j.contains("mixer")) {
        const auto& m = j.at("mixer");
        check_keys(m,
                   {"latent_width", "encoder_arch", "encoder_sharing", "mask_strategy",
                    "mask_keep_prob", "grid_cell", "ae_loss_enabled"},
                   "mixer");
        cfg.mixer.latent_width = m.value("latent_width", int64_t{0});
        cfg.mixer.encoder_arch = encoder_arch_from_name(m.value("encoder_arch", std::string("conv")));
        cfg.mixer.encoder_sharing =
            sharing_from_name(m.value("encoder_sharing", std::string("separate")));
        cfg.mixer.mask_strategy =
            mask_strategy_from_name(m.value("mask_strategy", std::string("random")));
        cfg.mixer.mask_keep_prob = m.value("mask_keep_prob", 0.5);
        cfg.mixer.grid_cell = m.value("grid_cell", int64_t{1});
        cfg.mixer.ae_loss_enabled = m.value("ae_loss_enabled", true);
    }
    if (j.contains("blockmix")) {
        const auto& b = j.at("blockmix");
        check_keys(b, {"w", "route_prob", "keep_prob"}, "blockmix");
        cfg.blockmix.w = b.value("w", 0.5);
        cfg.blockmix.route_prob = b.value("route_prob", 0.5);
        cfg.blockmix.keep_prob = b.value("keep_prob", 0.5);
    }
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        check_keys(w, {"rec", "kd", "feat", "block"}, "weights");
        cfg.weights.rec = w.value("rec", 1.0);
        cfg.weights.kd = w.value("kd", 1.0);
        cfg.weights.feat = w.value("feat", 1.0);
        cfg.weights.block = w.value("block", 0.1);
    }
    cfg.n_taps = j.value("n_taps", int64_t{4});
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        check_keys(o, {"adam_beta1", "adam_beta2", "eps"}, "optimizer");
        cfg.adam_beta1 = o.value("adam_beta1", 0.9);
        cfg.adam_beta2 = o.value("adam_beta2", 0.99);
        cfg.adam_eps = o.value("eps", 1e-8);
    }
    cfg.lr = j.value("lr", 1e-4);
    cfg.lr_decay_every = j.value("lr_decay_every", int64_t{100000});
    cfg.lr_decay_factor = j.value("lr_decay_factor", 0.1);
    cfg.iters = j.value("iters", int64_t{2000});
    cfg.batch = j.value("batch", int64_t{16});
    cfg.seed = j.value("seed", uint64_t{1});
    cfg.eval_every = j.value("eval_every", int64_t{0});
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        check_keys(d,
                   {"source", "hr_dir", "scale", "patch_size_lr", "augment", "synth_count",
                    "synth_size", "synth_seed"},
                   "dataset");
        const auto src = d.value("source", std::string("synthetic"));
        if (src == "directory")
            cfg.dataset.source = DatasetSpec::Source::Directory;
        else if (src == "synthetic")
            cfg.dataset.source = DatasetSpec::Source::Synthetic;
        else
            throw ConfigError("unknown dataset source: " + src);
        cfg.dataset.hr_dir = d.value("hr_dir", std::string());
        cfg.dataset.scale = d.value("scale", cfg.student_spec.scale);
        cfg.dataset.patch_size_lr = d.value("patch_size_lr", int64_t{48});
        cfg.dataset.augment = d.value("augment", true);
        cfg.dataset.synth_count = d.value("synth_count", int64_t{32});
        cfg.dataset.synth_size = d.value("synth_size", int64_t{96});
        cfg.dataset.synth_seed = d.value("synth_seed", uint64_t{7});
    } else {
        cfg.dataset.scale = cfg.student_spec.scale;
    }
    cfg.eval_dir = j.value("eval_dir", std::string());
    cfg.out_dir = j.value("out_dir", std::string("runs"));

    if (const char* env_seed = std::getenv("MIPKD_SEED")) cfg.seed = std::stoull(env_seed);
    cfg.validate();
    return cfg;
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
    return {
        {"method", method_name(cfg.method)},
        {"teacher", spec_section_to_json(cfg.teacher_spec)},
        {"student", spec_section_to_json(cfg.student_spec)},
        {"teacher_ckpt", cfg.teacher_ckpt},
        {"mixer",
         {{"latent_width", cfg.mixer.latent_width},
          {"encoder_arch", encoder_arch_name(cfg.mixer.encoder_arch)},
          {"encoder_sharing", sharing_name(cfg.mixer.encoder_sharing)},
          {"mask_strategy", mask_strategy_name(cfg.mixer.mask_strategy)},
          {"mask_keep_prob", cfg.mixer.mask_keep_prob},
          {"grid_cell", cfg.mixer.grid_cell},
          {"ae_loss_enabled", cfg.mixer.ae_loss_enabled}}},
        {"blockmix",
         {{"w", cfg.blockmix.w},
          {"route_prob", cfg.blockmix.route_prob},
          {"keep_prob", cfg.blockmix.keep_prob}}},
        {"weights",
         {{"rec", cfg.weights.rec},
          {"kd", cfg.weights.kd},
          {"feat", cfg.weights.feat},
          {"block", cfg.weights.block}}},
        {"n_taps", cfg.n_taps},
        {"optimizer",
         {{"adam_beta1", cfg.adam_beta1}, {"adam_beta2", cfg.adam_beta2}, {"eps", cfg.adam_eps}}},
        {"lr", cfg.lr},
        {"lr_decay_every", cfg.lr_decay_every},
        {"lr_decay_factor", cfg.lr_decay_factor},
        {"iters", cfg.iters},
        {"batch", cfg.batch},
        {"seed", cfg.seed},
        {"eval_every", cfg.eval_every},
        {"dataset",
         {{"source", cfg.dataset.source == DatasetSpec::Source::Directory ? "directory" : "synthetic"},
          {"hr_dir", cfg.dataset.hr_dir},
          {"scale", cfg.dataset.scale},
          {"patch_size_lr", cfg.dataset.patch_size_lr},
          {"augment", cfg.dataset.augment},
          {"synth_count", cfg.dataset.synth_count},
          {"synth_size", cfg.dataset.synth_size},
          {"synth_seed", cfg.dataset.synth_seed}}},
        {"eval_dir", cfg.eval_dir},
        {"out_dir", cfg.out_dir},
    };
}

void apply_override(nlohmann::json& j, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + kv);
    std::string key = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);
    std::string pointer = "/";
    for (char& c : key)
        if (c == '.') c = '/';
    pointer += key;
    nlohmann::json parsed;
    // try JSON literal first (numbers, booleans), fall back to string
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
        parsed = value;
    }
    j[nlohmann::json::json_pointer(pointer)] = parsed;
}

TrainConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config: " + path);
    nlohmann::json j = nlohmann::json::parse(is);
    for (const auto& kv : overrides) apply_override(j, kv);
    return config_from_json(j);
}

}  // namespace mipkd
