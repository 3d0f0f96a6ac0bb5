#pragma once

#include <torch/torch.h>

#include <optional>
#include <string>
#include <vector>

#include "mipkd/errors.hpp"

namespace mipkd {

enum class EncoderArch { Conv, MLP };
enum class EncoderSharing { Separate, Shared, None };
enum class MaskStrategy { Random, Grid, Cosine, CKA };

std::string encoder_arch_name(EncoderArch a);
EncoderArch encoder_arch_from_name(const std::string& s);
std::string sharing_name(EncoderSharing s);
EncoderSharing sharing_from_name(const std::string& s);
std::string mask_strategy_name(MaskStrategy s);
MaskStrategy mask_strategy_from_name(const std::string& s);

struct MixerConfig {
    int64_t latent_width = 0;  // 0 = teacher width
    EncoderArch encoder_arch = EncoderArch::Conv;
    EncoderSharing encoder_sharing = EncoderSharing::Separate;
    MaskStrategy mask_strategy = MaskStrategy::Random;
    double mask_keep_prob = 0.5;  // probability an element takes the TEACHER value
    int64_t grid_cell = 1;
    bool ae_loss_enabled = true;

    void validate() const;
};

/// Teacher/student tap features into a unified latent space, fused under a
/// binary 3D mask, decoded back to teacher width. Adapters (1x1) convert the
/// decoded feature to student width; they exist only when widths differ.
struct MixerBundleImpl : torch::nn::Module {
    MixerBundleImpl(const MixerConfig& cfg, int64_t student_width, int64_t teacher_width,
                    int64_t n_taps);

    torch::Tensor encode_student(const torch::Tensor& f);
    torch::Tensor encode_teacher(const torch::Tensor& f);
    torch::Tensor decode(const torch::Tensor& z);

    MixerConfig cfg;
    int64_t student_width, teacher_width, latent_width;
    torch::nn::Sequential encoder_s{nullptr}, encoder_t{nullptr}, decoder{nullptr};
    std::vector<torch::nn::Conv2d> adapters;  // empty entries not allowed; vector empty when C_S == C_T
};
TORCH_MODULE(MixerBundle);

MixerBundle make_mixer_bundle(const MixerConfig& cfg, int64_t student_width, int64_t teacher_width,
                              int64_t n_taps, uint64_t rng_seed);

/// Single 1x1 identity convs everywhere (requires equal widths); used by the
/// path-equivalence checks where the mixer must be an exact no-op.
MixerBundle make_identity_bundle(int64_t width, int64_t n_taps);

struct LatentPair {
    torch::Tensor z_student;  // B x C x H x W
    torch::Tensor z_teacher;  // B x C x H x W
};

struct FeatureTap {
    int64_t position_index;
    torch::Tensor student_feature;  // B x C_S x H x W
    torch::Tensor teacher_feature;  // B x C_T x H x W
};

struct Mask3D {
    torch::Tensor values;  // B x C x H x W, elements in {0,1}; 1 selects the teacher value
    MaskStrategy strategy;
    uint64_t seed;
};

LatentPair encode_pair(MixerBundle& bundle, const FeatureTap& tap);

/// Random: iid Bernoulli(p) per element. Grid: checkerboard over grid_cell^3
/// cells of (C,H,W). Cosine/CKA: per-channel masks, teacher-valued on the
/// ceil(p*C) channels with lowest student/teacher latent similarity (ties
/// broken by lowest channel index). Deterministic given seed.
Mask3D generate_mask(const MixerConfig& cfg, int64_t batch, std::array<int64_t, 3> shape,
                     const std::optional<LatentPair>& latents, uint64_t seed);

torch::Tensor fuse_latents(const LatentPair& latents, const Mask3D& mask);
torch::Tensor fuse_and_decode(MixerBundle& bundle, const LatentPair& latents, const Mask3D& mask);

/// Mean absolute error between the enhanced and teacher feature maps.
torch::Tensor feature_mixer_loss(const torch::Tensor& enhanced, const torch::Tensor& teacher_feature);

/// Reconstruction of the teacher feature through encoder_t . decoder, no masking.
torch::Tensor autoencoder_loss(MixerBundle& bundle, const torch::Tensor& teacher_feature);

torch::Tensor adapt_to_student(MixerBundle& bundle, int64_t position_index,
                               const torch::Tensor& enhanced);

}  // namespace mipkd
