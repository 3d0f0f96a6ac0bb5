#pragma once

#include <torch/torch.h>

#include <optional>
#include <vector>

#include "mipkd/backbones.hpp"
#include "mipkd/mixer.hpp"
#include "mipkd/rng.hpp"

namespace mipkd {

struct BlockMixConfig {
    double w = 0.5;           // teacher-vs-ground-truth trade-off in the block loss
    double route_prob = 0.5;  // P[R = 1] (student path)
    double keep_prob = 0.5;   // P[D = 1]

    void validate() const {
        if (w < 0 || w > 1 || route_prob < 0 || route_prob > 1 || keep_prob < 0 || keep_prob > 1)
            throw ConfigError("block mix probabilities must lie in [0,1]");
    }
};

struct RoutingDecision {
    int64_t position_index;
    bool route_student;  // R = 1 -> student path, R = 0 -> teacher path
    bool keep;           // D = 0 -> position dropped, no mixed forward, no loss
};

/// K independent (R, D) pairs; deterministic given seed.
std::vector<RoutingDecision> sample_routing(const BlockMixConfig& cfg, int64_t k, uint64_t seed);

/// Splice the enhanced feature into the remainder of the teacher (R=0) or the
/// student (R=1, through the per-tap width adapter). Requires both models to
/// have run their full forward this iteration (head caches). Returns nothing
/// when the position is dropped.
std::optional<torch::Tensor> mixed_forward(SRModel& teacher, SRModel& student, MixerBundle& bundle,
                                           const TapSet& taps, const torch::Tensor& enhanced,
                                           const RoutingDecision& decision);

/// w * MAE(mixed, teacher_sr) + (1-w) * MAE(mixed, hr)
torch::Tensor block_mix_loss(const torch::Tensor& mixed_sr, const torch::Tensor& teacher_sr,
                             const torch::Tensor& hr, const BlockMixConfig& cfg);

}  // namespace mipkd
