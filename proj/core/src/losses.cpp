#include "mipkd/losses.hpp"

namespace mipkd {

torch::Tensor rec_loss(const torch::Tensor& student_sr, const torch::Tensor& hr) {
    if (!student_sr.sizes().equals(hr.sizes())) throw DimensionError("rec_loss shape mismatch");
    return torch::l1_loss(student_sr, hr);
}

torch::Tensor logits_loss(const torch::Tensor& student_sr, const torch::Tensor& teacher_sr) {
    if (!student_sr.sizes().equals(teacher_sr.sizes()))
        throw DimensionError("logits_loss shape mismatch");
    return torch::l1_loss(student_sr, teacher_sr);
}

torch::Tensor total_loss(const LossTerms& terms, const LossWeights& weights) {
    weights.validate();
    // Accumulate in float64 so the recorded total recomposes from the recorded
    // parts within the stated tolerance.
    auto total = weights.rec * terms.rec.to(torch::kFloat64) +
                 weights.kd * terms.logits.to(torch::kFloat64);
    for (size_t k = 0; k < terms.feat_per_tap.size(); ++k) {
        auto feat = terms.feat_per_tap[k].to(torch::kFloat64);
        if (k < terms.ae_per_tap.size()) feat = feat + terms.ae_per_tap[k].to(torch::kFloat64);
        total = total + weights.feat * feat;
    }
    for (const auto& b : terms.block_per_tap)
        if (b.has_value()) total = total + weights.block * b->to(torch::kFloat64);
    return total;
}

LossBreakdown breakdown(const LossTerms& terms, const LossWeights& weights) {
    LossBreakdown br;
    br.rec = terms.rec.item<double>();
    br.logits = terms.logits.item<double>();
    for (const auto& t : terms.feat_per_tap) br.feat_per_tap.push_back(t.item<double>());
    for (const auto& t : terms.ae_per_tap) br.ae_per_tap.push_back(t.item<double>());
    for (const auto& b : terms.block_per_tap)
        br.block_per_tap.push_back(b ? std::optional<double>(b->item<double>()) : std::nullopt);
    br.total = br.recompose(weights);
    return br;
}

double LossBreakdown::recompose(const LossWeights& w) const {
    double total = w.rec * rec + w.kd * logits;
    for (size_t k = 0; k < feat_per_tap.size(); ++k) {
        double f = feat_per_tap[k] + (k < ae_per_tap.size() ? ae_per_tap[k] : 0.0);
        total += w.feat * f;
    }
    for (const auto& b : block_per_tap)
        if (b.has_value()) total += w.block * *b;
    return total;
}

namespace {

// B x C x H x W -> B x (HW), spatial attention map normalized over space
torch::Tensor attention_map(const torch::Tensor& f) {
    auto am = f.pow(2).sum(1).flatten(1);  // B x (HW)
    return am / am.norm(2, /*dim=*/1, /*keepdim=*/true).clamp_min(1e-12);
}

}  // namespace

torch::Tensor at_loss(const torch::Tensor& student_feature, const torch::Tensor& teacher_feature) {
    if (student_feature.size(2) != teacher_feature.size(2) ||
        student_feature.size(3) != teacher_feature.size(3))
        throw DimensionError("at_loss spatial dims mismatch");
    return torch::mse_loss(attention_map(student_feature), attention_map(teacher_feature));
}

torch::Tensor fitnet_loss(const torch::Tensor& student_feature, const torch::Tensor& teacher_feature,
                          torch::nn::Conv2d& hint_adapter) {
    auto hint = hint_adapter(student_feature);
    if (!hint.sizes().equals(teacher_feature.sizes()))
        throw DimensionError("fitnet hint/teacher shape mismatch");
    return torch::mse_loss(hint, teacher_feature);
}

torch::Tensor fakd_affinity_loss(const torch::Tensor& student_feature,
                                 const torch::Tensor& teacher_feature) {
    if (student_feature.size(2) != teacher_feature.size(2) ||
        student_feature.size(3) != teacher_feature.size(3))
        throw DimensionError("fakd_affinity_loss spatial dims mismatch");
    auto affinity = [](const torch::Tensor& f) {
        auto x = f.flatten(2);  // B x C x (HW)
        x = x / x.norm(2, /*dim=*/1, /*keepdim=*/true).clamp_min(1e-12);
        return torch::bmm(x.transpose(1, 2), x);  // B x HW x HW
    };
    return torch::l1_loss(affinity(student_feature), affinity(teacher_feature));
}

}  // namespace mipkd
