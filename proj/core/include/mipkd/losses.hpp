#pragma once

#include <torch/torch.h>

#include <optional>
#include <vector>

#include "mipkd/errors.hpp"

namespace mipkd {

struct LossWeights {
    double rec = 1.0;
    double kd = 1.0;
    double feat = 1.0;
    double block = 0.1;

    void validate() const {
        if (rec < 0 || kd < 0 || feat < 0 || block < 0)
            throw ConfigError("loss weights must be nonnegative");
    }
};

/// Per-term loss tensors for one iteration. Absent block entries are dropped taps.
struct LossTerms {
    torch::Tensor rec;
    torch::Tensor logits;
    std::vector<torch::Tensor> feat_per_tap;  // feature-mixer loss per kept mixer tap
    std::vector<torch::Tensor> ae_per_tap;    // empty when AE loss disabled
    std::vector<std::optional<torch::Tensor>> block_per_tap;
};

/// Scalar record of the same breakdown, for curves and reports.
struct LossBreakdown {
    double rec = 0, logits = 0, total = 0;
    std::vector<double> feat_per_tap, ae_per_tap;
    std::vector<std::optional<double>> block_per_tap;

    double recompose(const LossWeights& w) const;
};

torch::Tensor rec_loss(const torch::Tensor& student_sr, const torch::Tensor& hr);
torch::Tensor logits_loss(const torch::Tensor& student_sr, const torch::Tensor& teacher_sr);

/// Weighted composition: w.rec*rec + w.kd*logits + sum_k (w.feat*(feat_k + ae_k) + w.block*block_k).
torch::Tensor total_loss(const LossTerms& terms, const LossWeights& weights);
LossBreakdown breakdown(const LossTerms& terms, const LossWeights& weights);

// --- baseline feature-KD losses ---

/// Attention transfer: per-item spatial map = sum of squared channels, L2-normalized
/// over space; mean squared difference of the normalized maps. Width-agnostic and
/// invariant to positive rescaling of either feature.
torch::Tensor at_loss(const torch::Tensor& student_feature, const torch::Tensor& teacher_feature);

/// FitNet hint: MSE between the adapted student feature and the teacher feature.
torch::Tensor fitnet_loss(const torch::Tensor& student_feature, const torch::Tensor& teacher_feature,
                          torch::nn::Conv2d& hint_adapter);

/// FAKD-style spatial affinity: flatten to C x (HW), L2-normalize each spatial
/// column, Gram matrix (HW x HW); MAE between student and teacher affinities.
torch::Tensor fakd_affinity_loss(const torch::Tensor& student_feature,
                                 const torch::Tensor& teacher_feature);

}  // namespace mipkd
