#include "mipkd/backbones.hpp"

#include <cmath>

namespace mipkd {

std::string arch_name(Arch a) { return a == Arch::EDSR ? "edsr" : "rcan"; }

Arch arch_from_name(const std::string& name) {
    if (name == "edsr" || name == "EDSR") return Arch::EDSR;
    if (name == "rcan" || name == "RCAN") return Arch::RCAN;
    throw ConfigError("unknown arch: " + name);
}

void NetworkSpec::validate() const {
    if (channels < 1) throw ConfigError("channels must be >= 1");
    if (blocks < 1) throw ConfigError("blocks must be >= 1");
    if (groups < 1) throw ConfigError("groups must be >= 1");
    if (scale != 2 && scale != 3 && scale != 4)
        throw ConfigError("unsupported scale " + std::to_string(scale) + " (supported: 2,3,4)");
    if (arch == Arch::EDSR && groups != 1) throw ConfigError("EDSR requires groups == 1");
    if (arch == Arch::RCAN && attention_reduction < 1)
        throw ConfigError("attention_reduction must be >= 1");
    if (arch == Arch::RCAN && channels / attention_reduction < 1)
        throw ConfigError("attention_reduction too large for channel width");
}

namespace {

inline int64_t conv_params(int64_t cin, int64_t cout, int64_t k) { return cin * cout * k * k + cout; }

int64_t upsampler_params(int64_t c, int64_t scale) {
    switch (scale) {
        case 2: return conv_params(c, 4 * c, 3);
        case 3: return conv_params(c, 9 * c, 3);
        case 4: return 2 * conv_params(c, 4 * c, 3);
        default: throw ConfigError("unsupported scale");
    }
}

}  // namespace

int64_t param_count_formula(const NetworkSpec& spec) {
    spec.validate();
    const int64_t c = spec.channels;
    int64_t trunk = 0;
    if (spec.arch == Arch::EDSR) {
        trunk = spec.blocks * 2 * conv_params(c, c, 3);
    } else {
        const int64_t r = spec.attention_reduction;
        const int64_t rcab = 2 * conv_params(c, c, 3) + conv_params(c, c / r, 1) + conv_params(c / r, c, 1);
        trunk = spec.groups * (spec.blocks * rcab + conv_params(c, c, 3));
    }
    return conv_params(3, c, 3) + trunk + conv_params(c, c, 3) + upsampler_params(c, spec.scale) +
           conv_params(c, 3, 3);
}

std::vector<int64_t> TapSet::student_units() const {
    std::vector<int64_t> out;
    for (const auto& t : taps) out.push_back(t.student_unit);
    return out;
}

std::vector<int64_t> TapSet::teacher_units() const {
    std::vector<int64_t> out;
    for (const auto& t : taps) out.push_back(t.teacher_unit);
    return out;
}

void TapSet::validate(const NetworkSpec& student, const NetworkSpec& teacher) const {
    if (taps.empty()) throw ConfigError("tap set is empty");
    int64_t prev_s = -1, prev_t = -1;
    for (const auto& t : taps) {
        if (t.student_unit <= prev_s || t.teacher_unit <= prev_t)
            throw ConfigError("tap indices must be strictly increasing in both networks");
        if (t.student_unit >= student.unit_count() || t.teacher_unit >= teacher.unit_count())
            throw ConfigError("tap index beyond trunk unit count");
        if (t.student_unit < 0 || t.teacher_unit < 0) throw ConfigError("negative tap index");
        prev_s = t.student_unit;
        prev_t = t.teacher_unit;
    }
}

TapSet default_taps(const NetworkSpec& student, const NetworkSpec& teacher, int64_t k) {
    const int64_t ns = student.unit_count();
    const int64_t nt = teacher.unit_count();
    k = std::min(k, std::min(ns, nt));
    TapSet set;
    int64_t prev_s = -1, prev_t = -1;
    for (int64_t i = 1; i <= k; ++i) {
        // student boundary after block b (1-based), evenly spaced
        int64_t b = std::llround(static_cast<double>(i * ns) / static_cast<double>(k));
        int64_t s_idx = std::max<int64_t>(b - 1, prev_s + 1);
        int64_t t_idx = std::llround(static_cast<double>((s_idx + 1) * nt) / static_cast<double>(ns)) - 1;
        t_idx = std::clamp<int64_t>(t_idx, prev_t + 1, nt - 1);
        s_idx = std::min(s_idx, ns - 1);
        set.taps.push_back({s_idx, t_idx});
        prev_s = s_idx;
        prev_t = t_idx;
    }
    set.validate(student, teacher);
    return set;
}

// ---------------------------------------------------------------- blocks ---

ResBlockImpl::ResBlockImpl(int64_t channels, double res_scale_) : res_scale(res_scale_) {
    conv1 = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
    conv2 = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
}

torch::Tensor ResBlockImpl::forward(torch::Tensor x) {
    auto res = conv2(torch::relu(conv1(x)));
    return x + res * res_scale;
}

ChannelAttentionImpl::ChannelAttentionImpl(int64_t channels, int64_t reduction) {
    down = register_module("down", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels / reduction, 1)));
    up = register_module("up", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels / reduction, channels, 1)));
}

torch::Tensor ChannelAttentionImpl::forward(torch::Tensor x) {
    auto g = torch::adaptive_avg_pool2d(x, {1, 1});
    g = torch::sigmoid(up(torch::relu(down(g))));
    return x * g;
}

RcabImpl::RcabImpl(int64_t channels, int64_t reduction, double res_scale_) : res_scale(res_scale_) {
    conv1 = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
    conv2 = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
    ca = register_module("ca", ChannelAttention(channels, reduction));
}

torch::Tensor RcabImpl::forward(torch::Tensor x) {
    auto res = ca(conv2(torch::relu(conv1(x))));
    return x + res * res_scale;
}

ResGroupImpl::ResGroupImpl(int64_t channels, int64_t n_blocks, int64_t reduction, double res_scale) {
    blocks = register_module("blocks", torch::nn::ModuleList());
    for (int64_t i = 0; i < n_blocks; ++i) blocks->push_back(Rcab(channels, reduction, res_scale));
    tail_conv = register_module("tail_conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
}

torch::Tensor ResGroupImpl::forward(torch::Tensor x) {
    auto h = x;
    for (auto& b : *blocks) h = b->as<RcabImpl>()->forward(h);
    return x + tail_conv(h);
}

// ----------------------------------------------------------------- model ---

SRModelImpl::SRModelImpl(NetworkSpec spec_) : spec(spec_) {
    spec.validate();
    const int64_t c = spec.channels;
    const double rs = spec.effective_res_scale();
    head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, c, 3).padding(1)));
    units = register_module("units", torch::nn::ModuleList());
    if (spec.arch == Arch::EDSR) {
        for (int64_t i = 0; i < spec.blocks; ++i) units->push_back(ResBlock(c, rs));
    } else {
        for (int64_t i = 0; i < spec.groups; ++i)
            units->push_back(ResGroup(c, spec.blocks, spec.attention_reduction, rs));
    }
    body_end = register_module("body_end", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, c, 3).padding(1)));
    upsampler = register_module("upsampler", torch::nn::Sequential());
    auto push_stage = [&](int64_t s) {
        upsampler->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(c, c * s * s, 3).padding(1)));
        upsampler->push_back(torch::nn::Functional([s](torch::Tensor x) { return torch::pixel_shuffle(x, s); }));
    };
    if (spec.scale == 4) {
        push_stage(2);
        push_stage(2);
    } else {
        push_stage(spec.scale);
    }
    tail = register_module("tail", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, 3, 3).padding(1)));
}

torch::Tensor SRModelImpl::run_unit(int64_t i, const torch::Tensor& x) {
    auto m = units[static_cast<size_t>(i)];
    if (auto* b = m->as<ResBlockImpl>()) return b->forward(x);
    return m->as<ResGroupImpl>()->forward(x);
}

torch::Tensor SRModelImpl::finish(torch::Tensor trunk, const torch::Tensor& head_feat) {
    trunk = body_end(trunk) + head_feat;
    return tail(upsampler->forward(trunk));
}

ForwardResult SRModelImpl::forward_with_taps(const torch::Tensor& lr_batch,
                                             const std::vector<int64_t>& tap_units) {
    if (lr_batch.dim() != 4 || lr_batch.size(1) != 3)
        throw DimensionError("expected lr batch of shape B x 3 x h x w");
    for (int64_t u : tap_units)
        if (u < 0 || u >= unit_count())
            throw ConfigError("tap index " + std::to_string(u) + " beyond trunk unit count");

    auto x = head(lr_batch);
    cached_head = x;
    ForwardResult out;
    out.taps.reserve(tap_units.size());
    size_t next_tap = 0;
    auto trunk = x;
    for (int64_t i = 0; i < unit_count(); ++i) {
        trunk = run_unit(i, trunk);
        while (next_tap < tap_units.size() && tap_units[next_tap] == i) {
            out.taps.push_back(trunk);
            ++next_tap;
        }
    }
    out.sr = finish(trunk, x);
    return out;
}

torch::Tensor SRModelImpl::forward_from(int64_t unit_index, const torch::Tensor& feature) {
    if (unit_index < 0 || unit_index >= unit_count()) throw ConfigError("invalid resume position");
    if (feature.dim() != 4 || feature.size(1) != spec.channels)
        throw DimensionError("injected feature width " +
                             std::to_string(feature.dim() == 4 ? feature.size(1) : -1) +
                             " does not match model width " + std::to_string(spec.channels));
    if (!cached_head.defined())
        throw ConfigError("forward_from requires a prior full forward (head feature cache empty)");
    auto trunk = feature;
    for (int64_t i = unit_index + 1; i < unit_count(); ++i) trunk = run_unit(i, trunk);
    return finish(trunk, cached_head);
}

void SRModelImpl::freeze() {
    for (auto& p : parameters()) p.set_requires_grad(false);
    frozen_ = true;
}

int64_t SRModelImpl::count_params() const {
    int64_t n = 0;
    for (const auto& p : parameters()) n += p.numel();
    return n;
}

SRModel build_model(const NetworkSpec& spec, uint64_t rng_seed) {
    spec.validate();
    torch::manual_seed(rng_seed);
    SRModel model(spec);
    torch::NoGradGuard ng;
    for (auto& m : model->modules(/*include_self=*/false)) {
        if (auto* conv = m->as<torch::nn::Conv2dImpl>()) {
            const auto& w = conv->weight;
            int64_t fan_in = w.size(1) * w.size(2) * w.size(3);
            double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            torch::nn::init::uniform_(conv->weight, -bound, bound);
            if (conv->bias.defined()) conv->bias.zero_();
        }
    }
    return model;
}

}  // namespace mipkd
