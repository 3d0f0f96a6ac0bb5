#include "mipkd/mixer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mipkd/rng.hpp"

namespace mipkd {

std::string encoder_arch_name(EncoderArch a) { return a == EncoderArch::Conv ? "conv" : "mlp"; }

EncoderArch encoder_arch_from_name(const std::string& s) {
    if (s == "conv") return EncoderArch::Conv;
    if (s == "mlp") return EncoderArch::MLP;
    throw ConfigError("unknown encoder arch: " + s);
}

std::string sharing_name(EncoderSharing s) {
    switch (s) {
        case EncoderSharing::Separate: return "separate";
        case EncoderSharing::Shared: return "shared";
        default: return "none";
    }
}

EncoderSharing sharing_from_name(const std::string& s) {
    if (s == "separate") return EncoderSharing::Separate;
    if (s == "shared") return EncoderSharing::Shared;
    if (s == "none") return EncoderSharing::None;
    throw ConfigError("unknown encoder sharing: " + s);
}

std::string mask_strategy_name(MaskStrategy s) {
    switch (s) {
        case MaskStrategy::Random: return "random";
        case MaskStrategy::Grid: return "grid";
        case MaskStrategy::Cosine: return "cosine";
        default: return "cka";
    }
}

MaskStrategy mask_strategy_from_name(const std::string& s) {
    if (s == "random") return MaskStrategy::Random;
    if (s == "grid") return MaskStrategy::Grid;
    if (s == "cosine") return MaskStrategy::Cosine;
    if (s == "cka") return MaskStrategy::CKA;
    throw ConfigError("unknown mask strategy: " + s);
}

void MixerConfig::validate() const {
    if (latent_width < 0) throw ConfigError("latent_width must be >= 0");
    if (!(mask_keep_prob > 0.0 && mask_keep_prob < 1.0))
        throw ConfigError("mask_keep_prob must lie in (0,1)");
    if (grid_cell < 1) throw ConfigError("grid_cell must be >= 1");
}

namespace {

torch::nn::Sequential make_coder(EncoderArch arch, int64_t cin, int64_t cmid, int64_t cout) {
    const int64_t k = arch == EncoderArch::Conv ? 3 : 1;
    torch::nn::Sequential seq;
    seq->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(cin, cmid, k).padding(k / 2)));
    seq->push_back(torch::nn::ReLU());
    seq->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(cmid, cout, k).padding(k / 2)));
    return seq;
}

void init_convs(torch::nn::Module& root) {
    torch::NoGradGuard ng;
    for (auto& m : root.modules(false)) {
        if (auto* conv = m->as<torch::nn::Conv2dImpl>()) {
            const auto& w = conv->weight;
            double bound = 1.0 / std::sqrt(static_cast<double>(w.size(1) * w.size(2) * w.size(3)));
            torch::nn::init::uniform_(conv->weight, -bound, bound);
            if (conv->bias.defined()) conv->bias.zero_();
        }
    }
}

void set_identity_1x1(torch::nn::Conv2d& conv) {
    torch::NoGradGuard ng;
    conv->weight.zero_();
    const int64_t c = conv->weight.size(0);
    for (int64_t i = 0; i < c; ++i) conv->weight[i][i][0][0] = 1.0;
    conv->bias.zero_();
}

}  // namespace

MixerBundleImpl::MixerBundleImpl(const MixerConfig& cfg_, int64_t student_width_,
                                 int64_t teacher_width_, int64_t n_taps)
    : cfg(cfg_), student_width(student_width_), teacher_width(teacher_width_) {
    cfg.validate();
    latent_width = cfg.latent_width > 0 ? cfg.latent_width : teacher_width;
    switch (cfg.encoder_sharing) {
        case EncoderSharing::Separate:
            encoder_s = register_module("encoder_s",
                                        make_coder(cfg.encoder_arch, student_width, latent_width, latent_width));
            encoder_t = register_module("encoder_t",
                                        make_coder(cfg.encoder_arch, teacher_width, latent_width, latent_width));
            break;
        case EncoderSharing::Shared:
            if (student_width != teacher_width)
                throw ConfigError("shared encoder requires equal teacher/student widths");
            encoder_t = register_module("encoder_t",
                                        make_coder(cfg.encoder_arch, teacher_width, latent_width, latent_width));
            encoder_s = encoder_t;
            break;
        case EncoderSharing::None:
            if (student_width != teacher_width || latent_width != teacher_width)
                throw ConfigError("encoder_sharing=none requires equal widths (raw features as latents)");
            break;
    }
    decoder = register_module("decoder",
                              make_coder(cfg.encoder_arch, latent_width, latent_width, teacher_width));
    if (student_width != teacher_width) {
        for (int64_t i = 0; i < n_taps; ++i) {
            auto a = torch::nn::Conv2d(torch::nn::Conv2dOptions(teacher_width, student_width, 1));
            adapters.push_back(register_module("adapter_" + std::to_string(i), a));
        }
    }
}

torch::Tensor MixerBundleImpl::encode_student(const torch::Tensor& f) {
    if (f.size(1) != student_width) throw DimensionError("student feature width mismatch");
    return encoder_s ? encoder_s->forward(f) : f;
}

torch::Tensor MixerBundleImpl::encode_teacher(const torch::Tensor& f) {
    if (f.size(1) != teacher_width) throw DimensionError("teacher feature width mismatch");
    return encoder_t ? encoder_t->forward(f) : f;
}

torch::Tensor MixerBundleImpl::decode(const torch::Tensor& z) { return decoder->forward(z); }

MixerBundle make_mixer_bundle(const MixerConfig& cfg, int64_t student_width, int64_t teacher_width,
                              int64_t n_taps, uint64_t rng_seed) {
    torch::manual_seed(rng_seed);
    MixerBundle bundle(cfg, student_width, teacher_width, n_taps);
    init_convs(*bundle);
    return bundle;
}

MixerBundle make_identity_bundle(int64_t width, int64_t n_taps) {
    MixerConfig cfg;
    cfg.latent_width = width;
    cfg.encoder_arch = EncoderArch::MLP;
    MixerBundle bundle(cfg, width, width, n_taps);
    // Collapse each coder to a single identity 1x1 conv.
    auto identity_seq = [&](const char* name) {
        torch::nn::Sequential seq;
        auto conv = torch::nn::Conv2d(torch::nn::Conv2dOptions(width, width, 1));
        set_identity_1x1(conv);
        seq->push_back(conv);
        bundle->replace_module(name, seq);
        return seq;
    };
    bundle->encoder_s = identity_seq("encoder_s");
    bundle->encoder_t = identity_seq("encoder_t");
    bundle->decoder = identity_seq("decoder");
    (void)n_taps;  // equal widths: no adapters, adapt_to_student is the identity
    return bundle;
}

LatentPair encode_pair(MixerBundle& bundle, const FeatureTap& tap) {
    if (tap.student_feature.size(2) != tap.teacher_feature.size(2) ||
        tap.student_feature.size(3) != tap.teacher_feature.size(3))
        throw DimensionError("tap spatial dims differ between student and teacher");
    return {bundle->encode_student(tap.student_feature), bundle->encode_teacher(tap.teacher_feature)};
}

namespace {

torch::Tensor random_mask(int64_t batch, std::array<int64_t, 3> shape, double p, uint64_t seed) {
    const int64_t n = batch * shape[0] * shape[1] * shape[2];
    auto mask = torch::empty({n}, torch::kFloat32);
    float* data = mask.data_ptr<float>();
    RngStream rng(seed);
    for (int64_t i = 0; i < n; ++i) data[i] = rng.next_bernoulli(p) ? 1.0f : 0.0f;
    return mask.view({batch, shape[0], shape[1], shape[2]});
}

torch::Tensor grid_mask(int64_t batch, std::array<int64_t, 3> shape, int64_t cell) {
    auto mask = torch::empty({shape[0], shape[1], shape[2]}, torch::kFloat32);
    float* data = mask.data_ptr<float>();
    int64_t idx = 0;
    for (int64_t c = 0; c < shape[0]; ++c)
        for (int64_t h = 0; h < shape[1]; ++h)
            for (int64_t w = 0; w < shape[2]; ++w)
                data[idx++] = static_cast<float>((c / cell + h / cell + w / cell) % 2 == 0);
    return mask.unsqueeze(0).expand({batch, -1, -1, -1}).contiguous();
}

// Channels with lowest similarity take the teacher value; stable order breaks ties
// by lowest channel index.
torch::Tensor channels_from_similarity(const std::vector<double>& sim, int64_t n_teacher,
                                       std::array<int64_t, 3> shape) {
    const int64_t c = shape[0];
    std::vector<int64_t> order(c);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int64_t a, int64_t b) { return sim[a] < sim[b]; });
    auto mask = torch::zeros({c, shape[1], shape[2]}, torch::kFloat32);
    for (int64_t i = 0; i < n_teacher && i < c; ++i) mask[order[i]] = 1.0f;
    return mask;
}

torch::Tensor cosine_mask(std::array<int64_t, 3> shape, const LatentPair& latents, double p) {
    const int64_t batch = latents.z_student.size(0);
    const int64_t c = shape[0];
    const auto n_teacher = static_cast<int64_t>(std::ceil(p * static_cast<double>(c)));
    auto zs = latents.z_student.detach().to(torch::kFloat64).reshape({batch, c, -1});
    auto zt = latents.z_teacher.detach().to(torch::kFloat64).reshape({batch, c, -1});
    std::vector<torch::Tensor> per_item;
    for (int64_t b = 0; b < batch; ++b) {
        std::vector<double> sim(c);
        for (int64_t ch = 0; ch < c; ++ch) {
            auto a = zs[b][ch];
            auto t = zt[b][ch];
            double denom = a.norm().item<double>() * t.norm().item<double>();
            sim[ch] = denom > 0 ? a.dot(t).item<double>() / denom : 1.0;
        }
        per_item.push_back(channels_from_similarity(sim, n_teacher, shape));
    }
    return torch::stack(per_item);
}

torch::Tensor cka_mask(int64_t batch, std::array<int64_t, 3> shape, const LatentPair& latents,
                       double p) {
    const int64_t c = shape[0];
    const auto n_teacher = static_cast<int64_t>(std::ceil(p * static_cast<double>(c)));
    auto zs = latents.z_student.detach().to(torch::kFloat64).reshape({batch, c, -1});
    auto zt = latents.z_teacher.detach().to(torch::kFloat64).reshape({batch, c, -1});
    std::vector<double> sim(c);
    for (int64_t ch = 0; ch < c; ++ch) {
        // linear-kernel CKA over the batch: rows are batch items, columns spatial features
        auto x = zs.index({torch::indexing::Slice(), ch}).clone();  // B x HW
        auto y = zt.index({torch::indexing::Slice(), ch}).clone();
        x -= x.mean(0, /*keepdim=*/true);
        y -= y.mean(0, /*keepdim=*/true);
        double cross = torch::matmul(y.t(), x).norm().item<double>();
        double nx = torch::matmul(x.t(), x).norm().item<double>();
        double ny = torch::matmul(y.t(), y).norm().item<double>();
        sim[ch] = (nx > 0 && ny > 0) ? (cross * cross) / (nx * ny) : 1.0;
    }
    auto mask = channels_from_similarity(sim, n_teacher, shape);
    return mask.unsqueeze(0).expand({batch, -1, -1, -1}).contiguous();
}

}  // namespace

Mask3D generate_mask(const MixerConfig& cfg, int64_t batch, std::array<int64_t, 3> shape,
                     const std::optional<LatentPair>& latents, uint64_t seed) {
    cfg.validate();
    Mask3D out;
    out.strategy = cfg.mask_strategy;
    out.seed = seed;
    switch (cfg.mask_strategy) {
        case MaskStrategy::Random:
            out.values = random_mask(batch, shape, cfg.mask_keep_prob, seed);
            break;
        case MaskStrategy::Grid:
            out.values = grid_mask(batch, shape, cfg.grid_cell);
            break;
        case MaskStrategy::Cosine:
            if (!latents) throw ConfigError("cosine mask strategy requires latents");
            out.values = cosine_mask(shape, *latents, cfg.mask_keep_prob);
            break;
        case MaskStrategy::CKA:
            if (!latents) throw ConfigError("cka mask strategy requires latents");
            out.values = cka_mask(batch, shape, *latents, cfg.mask_keep_prob);
            break;
    }
    return out;
}

torch::Tensor fuse_latents(const LatentPair& latents, const Mask3D& mask) {
    if (!latents.z_student.sizes().equals(latents.z_teacher.sizes()))
        throw DimensionError("latent pair shapes differ");
    if (!mask.values.sizes().equals(latents.z_student.sizes()))
        throw DimensionError("mask shape does not match latent shape");
    return latents.z_student * (1.0 - mask.values) + latents.z_teacher * mask.values;
}

torch::Tensor fuse_and_decode(MixerBundle& bundle, const LatentPair& latents, const Mask3D& mask) {
    return bundle->decode(fuse_latents(latents, mask));
}

torch::Tensor feature_mixer_loss(const torch::Tensor& enhanced, const torch::Tensor& teacher_feature) {
    if (!enhanced.sizes().equals(teacher_feature.sizes()))
        throw DimensionError("feature_mixer_loss shape mismatch");
    return torch::l1_loss(enhanced, teacher_feature);
}

torch::Tensor autoencoder_loss(MixerBundle& bundle, const torch::Tensor& teacher_feature) {
    if (!bundle->cfg.ae_loss_enabled) throw ConfigError("autoencoder loss is disabled in config");
    auto recon = bundle->decode(bundle->encode_teacher(teacher_feature));
    return torch::l1_loss(recon, teacher_feature);
}

torch::Tensor adapt_to_student(MixerBundle& bundle, int64_t position_index,
                               const torch::Tensor& enhanced) {
    if (enhanced.size(1) != bundle->teacher_width)
        throw DimensionError("adapt_to_student expects teacher-width input");
    if (bundle->student_width == bundle->teacher_width) return enhanced;
    if (position_index < 0 || position_index >= static_cast<int64_t>(bundle->adapters.size()))
        throw ConfigError("no adapter at position " + std::to_string(position_index));
    return bundle->adapters[static_cast<size_t>(position_index)](enhanced);
}

}  // namespace mipkd
