#include <torch/torch.h>

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mipkd/blockmix.hpp"

using namespace mipkd;

namespace {

NetworkSpec tiny_spec(int64_t channels, int64_t blocks) {
    NetworkSpec s;
    s.arch = Arch::EDSR;
    s.channels = channels;
    s.blocks = blocks;
    s.scale = 2;
    return s;
}

}  // namespace

TEST_CASE("routing is deterministic, covers every position and respects k") {
    BlockMixConfig cfg;
    auto a = sample_routing(cfg, 4, 11);
    auto b = sample_routing(cfg, 4, 11);
    REQUIRE(a.size() == 4);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].position_index == static_cast<int64_t>(i));
        CHECK(a[i].route_student == b[i].route_student);
        CHECK(a[i].keep == b[i].keep);
    }
    CHECK_THROWS_AS((sample_routing(cfg, 0, 1)), ConfigError);
}

TEST_CASE("routing frequencies match the configured probabilities") {
    BlockMixConfig cfg;
    cfg.route_prob = 0.3;
    cfg.keep_prob = 0.8;
    int64_t routes = 0, keeps = 0;
    const int64_t n = 20000;
    for (int64_t s = 0; s < n; ++s) {
        auto d = sample_routing(cfg, 1, static_cast<uint64_t>(s));
        routes += d[0].route_student;
        keeps += d[0].keep;
    }
    CHECK(std::abs(routes / static_cast<double>(n) - 0.3) < 0.02);
    CHECK(std::abs(keeps / static_cast<double>(n) - 0.8) < 0.02);
}

TEST_CASE("degenerate probabilities pin the bits") {
    BlockMixConfig cfg;
    cfg.route_prob = 0.0;
    cfg.keep_prob = 1.0;
    for (const auto& d : sample_routing(cfg, 16, 3)) {
        CHECK(!d.route_student);
        CHECK(d.keep);
    }
}

TEST_CASE("dropped positions yield no mixed forward") {
    auto teacher = build_model(tiny_spec(8, 4), 1);
    auto student = build_model(tiny_spec(8, 4), 2);
    auto bundle = make_identity_bundle(8, 2);
    auto taps = default_taps(student->spec, teacher->spec, 2);
    auto lr = torch::rand({1, 3, 8, 8});
    teacher->forward(lr);
    student->forward(lr);
    RoutingDecision dropped{0, true, false};
    CHECK(!mixed_forward(teacher, student, bundle, taps, torch::rand({1, 8, 8, 8}), dropped).has_value());
}

TEST_CASE("teacher route with the true tap feature reproduces the teacher output") {
    auto teacher = build_model(tiny_spec(8, 4), 1);
    auto student = build_model(tiny_spec(8, 4), 2);
    auto bundle = make_identity_bundle(8, 2);
    auto taps = default_taps(student->spec, teacher->spec, 2);
    auto lr = torch::rand({2, 3, 8, 8});
    auto t_out = teacher->forward_with_taps(lr, taps.teacher_units());
    student->forward(lr);
    for (int64_t k = 0; k < taps.size(); ++k) {
        RoutingDecision d{k, false, true};
        auto mixed = mixed_forward(teacher, student, bundle, taps, t_out.taps[static_cast<size_t>(k)], d);
        REQUIRE(mixed.has_value());
        CHECK((*mixed - t_out.sr).abs().max().item<double>() < 1e-5);
    }
}

TEST_CASE("student route with the true tap feature reproduces the student output") {
    auto teacher = build_model(tiny_spec(8, 4), 1);
    auto student = build_model(tiny_spec(8, 4), 2);
    auto bundle = make_identity_bundle(8, 2);
    auto taps = default_taps(student->spec, teacher->spec, 2);
    auto lr = torch::rand({2, 3, 8, 8});
    teacher->forward(lr);
    auto s_out = student->forward_with_taps(lr, taps.student_units());
    for (int64_t k = 0; k < taps.size(); ++k) {
        RoutingDecision d{k, true, true};
        auto mixed = mixed_forward(teacher, student, bundle, taps, s_out.taps[static_cast<size_t>(k)], d);
        REQUIRE(mixed.has_value());
        CHECK((*mixed - s_out.sr).abs().max().item<double>() < 1e-5);
    }
}

TEST_CASE("student route goes through the width adapter when widths differ") {
    MixerConfig mcfg;
    auto teacher = build_model(tiny_spec(8, 4), 1);
    auto student = build_model(tiny_spec(4, 4), 2);
    auto bundle = make_mixer_bundle(mcfg, 4, 8, 2, 7);
    auto taps = default_taps(student->spec, teacher->spec, 2);
    auto lr = torch::rand({1, 3, 8, 8});
    teacher->forward(lr);
    student->forward(lr);
    auto enhanced = torch::rand({1, 8, 8, 8});
    RoutingDecision d{0, true, true};
    auto via_mix = mixed_forward(teacher, student, bundle, taps, enhanced, d);
    REQUIRE(via_mix.has_value());
    auto manual = student->forward_from(taps.taps[0].student_unit, adapt_to_student(bundle, 0, enhanced));
    CHECK(torch::equal(*via_mix, manual));
    CHECK(via_mix->size(1) == 3);
}

TEST_CASE("enhanced feature must carry teacher width") {
    auto teacher = build_model(tiny_spec(8, 4), 1);
    auto student = build_model(tiny_spec(8, 4), 2);
    auto bundle = make_identity_bundle(8, 2);
    auto taps = default_taps(student->spec, teacher->spec, 2);
    auto lr = torch::rand({1, 3, 8, 8});
    teacher->forward(lr);
    student->forward(lr);
    RoutingDecision d{0, false, true};
    CHECK_THROWS_AS((mixed_forward(teacher, student, bundle, taps, torch::rand({1, 5, 8, 8}), d)), DimensionError);
    RoutingDecision beyond{5, false, true};
    CHECK_THROWS_AS((mixed_forward(teacher, student, bundle, taps, torch::rand({1, 8, 8, 8}), beyond)), ConfigError);
}

TEST_CASE("block mix loss matches the hand-computed convex combination") {
    BlockMixConfig cfg;
    cfg.w = 0.5;
    auto mixed = torch::rand({2, 3, 8, 8});
    auto tsr = torch::rand({2, 3, 8, 8});
    auto hr = torch::rand({2, 3, 8, 8});
    auto expected = 0.5 * (mixed - tsr).abs().mean() + 0.5 * (mixed - hr).abs().mean();
    CHECK(block_mix_loss(mixed, tsr, hr, cfg).item<double>() ==
          doctest::Approx(expected.item<double>()).epsilon(1e-7));

    cfg.w = 1.0;
    CHECK(block_mix_loss(mixed, tsr, hr, cfg).item<double>() ==
          doctest::Approx((mixed - tsr).abs().mean().item<double>()).epsilon(1e-7));
    cfg.w = 0.0;
    CHECK(block_mix_loss(mixed, tsr, hr, cfg).item<double>() ==
          doctest::Approx((mixed - hr).abs().mean().item<double>()).epsilon(1e-7));

    cfg.w = 0.5;
    CHECK_THROWS_AS((block_mix_loss(mixed, tsr, torch::rand({1, 3, 8, 8}), cfg)), DimensionError);
    cfg.w = 1.5;
    CHECK_THROWS_AS((block_mix_loss(mixed, tsr, hr, cfg)), ConfigError);
}

TEST_CASE("mixed loss back-propagates into the student on the student route") {
    auto teacher = build_model(tiny_spec(8, 4), 1);
    teacher->freeze();
    auto student = build_model(tiny_spec(8, 4), 2);
    auto bundle = make_identity_bundle(8, 2);
    auto taps = default_taps(student->spec, teacher->spec, 2);
    auto lr = torch::rand({1, 3, 8, 8});
    auto hr = torch::rand({1, 3, 16, 16});
    torch::Tensor t_sr;
    {
        torch::NoGradGuard ng;
        t_sr = teacher->forward(lr);
    }
    auto s_out = student->forward_with_taps(lr, taps.student_units());
    RoutingDecision d{1, true, true};
    auto mixed = mixed_forward(teacher, student, bundle, taps, s_out.taps[1], d);
    REQUIRE(mixed.has_value());
    BlockMixConfig cfg;
    block_mix_loss(*mixed, t_sr, hr, cfg).backward();
    double g = 0;
    for (const auto& p : student->parameters())
        if (p.grad().defined()) g += p.grad().abs().sum().item<double>();
    CHECK(g > 0.0);
    for (const auto& p : teacher->parameters()) CHECK(!p.requires_grad());
}
