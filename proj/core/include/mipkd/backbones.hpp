#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

#include "mipkd/errors.hpp"

namespace mipkd {

enum class Arch { EDSR, RCAN };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string& name);

/// Architecture hyperparameters of one SR network.
/// For EDSR, `blocks` is the trunk depth and `groups` must be 1.
/// For RCAN, `blocks` is the per-group RCAB count and `groups` the residual-group count.
struct NetworkSpec {
    Arch arch = Arch::EDSR;
    int64_t channels = 64;
    int64_t blocks = 16;
    int64_t groups = 1;
    int64_t scale = 4;
    double res_scale = 0.0;  // <= 0 means "auto": 0.1 when channels >= 256, else 1.0
    int64_t attention_reduction = 16;

    void validate() const;
    double effective_res_scale() const {
        return res_scale > 0 ? res_scale : (channels >= 256 ? 0.1 : 1.0);
    }
    /// Trunk units usable as tap positions: residual blocks (EDSR) or residual groups (RCAN).
    int64_t unit_count() const { return arch == Arch::EDSR ? blocks : groups; }
    bool operator==(const NetworkSpec&) const = default;
};

/// Closed-form scalar parameter count for a spec; must match the built model exactly.
int64_t param_count_formula(const NetworkSpec& spec);

/// One distillation position: matching trunk-unit boundaries in both networks.
/// Indices are 0-based; the tap feature is the trunk state after that unit's residual add.
struct TapSet {
    struct Tap {
        int64_t student_unit;
        int64_t teacher_unit;
    };
    std::vector<Tap> taps;

    int64_t size() const { return static_cast<int64_t>(taps.size()); }
    std::vector<int64_t> student_units() const;
    std::vector<int64_t> teacher_units() const;
    void validate(const NetworkSpec& student, const NetworkSpec& teacher) const;
};

/// K taps evenly spaced over the student trunk; teacher index = round(b * N_T / N_S)
/// at each student boundary b.
TapSet default_taps(const NetworkSpec& student, const NetworkSpec& teacher, int64_t k = 4);

struct ForwardResult {
    torch::Tensor sr;
    std::vector<torch::Tensor> taps;  // one per requested unit, in order
};

// EDSR residual block: conv3x3 - ReLU - conv3x3, scaled residual add.
struct ResBlockImpl : torch::nn::Module {
    ResBlockImpl(int64_t channels, double res_scale);
    torch::Tensor forward(torch::Tensor x);
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
    double res_scale;
};
TORCH_MODULE(ResBlock);

// RCAN channel attention: global pool -> 1x1 bottleneck -> sigmoid gate.
struct ChannelAttentionImpl : torch::nn::Module {
    ChannelAttentionImpl(int64_t channels, int64_t reduction);
    torch::Tensor forward(torch::Tensor x);
    torch::nn::Conv2d down{nullptr}, up{nullptr};
};
TORCH_MODULE(ChannelAttention);

// RCAB: conv-ReLU-conv with channel attention on the residual branch.
struct RcabImpl : torch::nn::Module {
    RcabImpl(int64_t channels, int64_t reduction, double res_scale);
    torch::Tensor forward(torch::Tensor x);
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
    ChannelAttention ca{nullptr};
    double res_scale;
};
TORCH_MODULE(Rcab);

// RCAN residual group: N RCABs + conv + group skip.
struct ResGroupImpl : torch::nn::Module {
    ResGroupImpl(int64_t channels, int64_t n_blocks, int64_t reduction, double res_scale);
    torch::Tensor forward(torch::Tensor x);
    torch::nn::ModuleList blocks;
    torch::nn::Conv2d tail_conv{nullptr};
};
TORCH_MODULE(ResGroup);

/// EDSR- or RCAN-style SR network with tappable trunk units and the ability to
/// resume forward propagation from any unit boundary with an injected feature.
///
/// `forward_with_taps` caches the head feature; `forward_from` reuses that cache
/// for the global-skip add, so it must be called after a full forward on the same
/// batch (one training thread per model instance).
struct SRModelImpl : torch::nn::Module {
    explicit SRModelImpl(NetworkSpec spec);

    ForwardResult forward_with_taps(const torch::Tensor& lr_batch,
                                    const std::vector<int64_t>& tap_units);
    torch::Tensor forward(const torch::Tensor& lr_batch) {
        return forward_with_taps(lr_batch, {}).sr;
    }
    /// Resume from the boundary after trunk unit `unit_index` with `feature` as trunk state.
    torch::Tensor forward_from(int64_t unit_index, const torch::Tensor& feature);

    int64_t unit_count() const { return spec.unit_count(); }
    void freeze();
    bool frozen() const { return frozen_; }
    int64_t count_params() const;

    NetworkSpec spec;
    torch::nn::Conv2d head{nullptr}, body_end{nullptr}, tail{nullptr};
    torch::nn::ModuleList units;
    torch::nn::Sequential upsampler;
    torch::Tensor cached_head;

private:
    torch::Tensor run_unit(int64_t i, const torch::Tensor& x);
    torch::Tensor finish(torch::Tensor trunk, const torch::Tensor& head_feat);
    bool frozen_ = false;
};
TORCH_MODULE(SRModel);

/// Deterministic given seed: conv weights fan-in-scaled uniform, biases zero.
SRModel build_model(const NetworkSpec& spec, uint64_t rng_seed);

}  // namespace mipkd
