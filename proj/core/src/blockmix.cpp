#include "mipkd/blockmix.hpp"

namespace mipkd {

std::vector<RoutingDecision> sample_routing(const BlockMixConfig& cfg, int64_t k, uint64_t seed) {
    cfg.validate();
    if (k < 1) throw ConfigError("need at least one tap position");
    RngStream rng(seed);
    std::vector<RoutingDecision> out;
    out.reserve(static_cast<size_t>(k));
    for (int64_t i = 0; i < k; ++i) {
        bool route = rng.next_bernoulli(cfg.route_prob);
        bool keep = rng.next_bernoulli(cfg.keep_prob);
        out.push_back({i, route, keep});
    }
    return out;
}

std::optional<torch::Tensor> mixed_forward(SRModel& teacher, SRModel& student, MixerBundle& bundle,
                                           const TapSet& taps, const torch::Tensor& enhanced,
                                           const RoutingDecision& decision) {
    if (!decision.keep) return std::nullopt;
    const auto k = decision.position_index;
    if (k < 0 || k >= taps.size()) throw ConfigError("routing position beyond tap set");
    if (enhanced.size(1) != teacher->spec.channels)
        throw DimensionError("enhanced feature must have teacher width");
    if (decision.route_student) {
        auto feat = adapt_to_student(bundle, k, enhanced);
        return student->forward_from(taps.taps[static_cast<size_t>(k)].student_unit, feat);
    }
    return teacher->forward_from(taps.taps[static_cast<size_t>(k)].teacher_unit, enhanced);
}

torch::Tensor block_mix_loss(const torch::Tensor& mixed_sr, const torch::Tensor& teacher_sr,
                             const torch::Tensor& hr, const BlockMixConfig& cfg) {
    cfg.validate();
    if (!mixed_sr.sizes().equals(teacher_sr.sizes()) || !mixed_sr.sizes().equals(hr.sizes()))
        throw DimensionError("block_mix_loss shape mismatch");
    return cfg.w * torch::l1_loss(mixed_sr, teacher_sr) +
           (1.0 - cfg.w) * torch::l1_loss(mixed_sr, hr);
}

}  // namespace mipkd
