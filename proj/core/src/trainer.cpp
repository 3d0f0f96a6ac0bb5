#include "mipkd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "mipkd/checkpoint.hpp"

namespace mipkd {

namespace fs = std::filesystem;

double lr_at(int64_t iter, const TrainConfig& cfg) {
    if (iter < 0) throw ConfigError("iteration must be >= 0");
    return cfg.lr * std::pow(cfg.lr_decay_factor, static_cast<double>(iter / cfg.lr_decay_every));
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json curve_json = nlohmann::json::array();
    for (const auto& b : curve) {
        nlohmann::json row = {{"rec", b.rec}, {"logits", b.logits}, {"total", b.total}};
        row["feat"] = b.feat_per_tap;
        row["ae"] = b.ae_per_tap;
        nlohmann::json blocks = nlohmann::json::array();
        for (const auto& v : b.block_per_tap)
            blocks.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
        row["block"] = blocks;
        curve_json.push_back(std::move(row));
    }
    nlohmann::json evals = nlohmann::json::array();
    for (const auto& e : final_eval)
        evals.push_back({{"dataset", e.dataset},
                         {"scale", e.scale},
                         {"mean_psnr", e.mean_psnr},
                         {"mean_ssim", e.mean_ssim},
                         {"images", e.per_image.size()}});
    return {{"config", config},
            {"curve", curve_json},
            {"final_eval", evals},
            {"student_ckpt", student_ckpt},
            {"mixer_ckpt", mixer_ckpt},
            {"run_dir", run_dir},
            {"wall_clock_sec", wall_clock_sec}};
}

namespace {

void check_finite(const torch::Tensor& t, const char* term, int64_t iter) {
    const double v = t.item<double>();
    if (!std::isfinite(v))
        throw std::runtime_error("non-finite " + std::string(term) + " loss at iteration " +
                                 std::to_string(iter));
}

Dataset make_eval_set(const TrainConfig& cfg) {
    if (!cfg.eval_dir.empty()) return load_hr_directory(cfg.eval_dir);
    Dataset d;
    d.hr_images = synth_textures(8, cfg.dataset.synth_size, mix_seed(cfg.dataset.synth_seed, 0xe7a1));
    for (int i = 0; i < 8; ++i) d.ids.push_back("eval_" + std::to_string(i));
    return d;
}

SRFunction model_fn(SRModel model) {
    return [model](const torch::Tensor& lr) mutable { return model->forward(lr); };
}

}  // namespace

RunReport train(const TrainConfig& cfg) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();
    torch::set_num_threads(1);  // reproducibility contract: single-worker mode

    const bool needs_teacher = cfg.method != Method::Scratch;
    const bool needs_taps = cfg.method == Method::MiPKD || cfg.method == Method::AT ||
                            cfg.method == Method::FitNet || cfg.method == Method::FAKD;

    SRModel teacher{nullptr};
    TapSet taps;
    if (needs_teacher) {
        teacher = load_model(cfg.teacher_ckpt);
        if (!(teacher->spec == cfg.teacher_spec))
            throw ConfigError("teacher checkpoint spec does not match configured teacher_spec");
        teacher->freeze();
        teacher->eval();
    }
    if (needs_taps) taps = default_taps(cfg.student_spec, cfg.teacher_spec, cfg.n_taps);

    auto student = build_model(cfg.student_spec, cfg.seed);

    std::vector<torch::Tensor> trainables = student->parameters();
    MixerBundle bundle{nullptr};
    if (cfg.method == Method::MiPKD) {
        bundle = make_mixer_bundle(cfg.mixer, cfg.student_spec.channels, cfg.teacher_spec.channels,
                                   taps.size(), mix_seed(cfg.seed, 0x6d78));
        auto bp = bundle->parameters();
        trainables.insert(trainables.end(), bp.begin(), bp.end());
    }
    torch::nn::Conv2d fitnet_adapter{nullptr};
    if (cfg.method == Method::FitNet && cfg.student_spec.channels != cfg.teacher_spec.channels) {
        torch::manual_seed(mix_seed(cfg.seed, 0xf17));
        fitnet_adapter = torch::nn::Conv2d(
            torch::nn::Conv2dOptions(cfg.student_spec.channels, cfg.teacher_spec.channels, 1));
        auto ap = fitnet_adapter->parameters();
        trainables.insert(trainables.end(), ap.begin(), ap.end());
    }

    torch::optim::Adam opt(trainables, torch::optim::AdamOptions(cfg.lr)
                                           .betas({cfg.adam_beta1, cfg.adam_beta2})
                                           .eps(cfg.adam_eps));

    auto data = load_dataset(cfg.dataset);
    RngStream data_rng(mix_seed(cfg.seed, 0xda7aULL));

    RunReport report;
    report.config = config_to_json(cfg);
    report.run_dir = (fs::path(cfg.out_dir) / cfg.run_name()).string();
    fs::create_directories(report.run_dir);

    auto eval_set = make_eval_set(cfg);

    const auto s_units = taps.student_units();
    const auto t_units = taps.teacher_units();

    for (int64_t iter = 0; iter < cfg.iters; ++iter) {
        const double lr_now = lr_at(iter, cfg);
        for (auto& group : opt.param_groups())
            static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr_now);

        auto batch = sample_batch(data, cfg.dataset, cfg.batch, data_rng);

        torch::Tensor teacher_sr;
        std::vector<torch::Tensor> teacher_taps;
        if (needs_teacher) {
            torch::NoGradGuard ng;
            auto tr = teacher->forward_with_taps(batch.lr, t_units);
            teacher_sr = tr.sr;
            teacher_taps = tr.taps;
        }
        auto sr = student->forward_with_taps(batch.lr, s_units);

        LossTerms terms;
        terms.rec = rec_loss(sr.sr, batch.hr);
        terms.logits = needs_teacher ? logits_loss(sr.sr, teacher_sr)
                                     : torch::zeros({}, torch::kFloat32);

        if (cfg.method == Method::MiPKD) {
            auto routing = sample_routing(cfg.blockmix, taps.size(), mix_seed(cfg.seed, iter, 0xb10cULL));
            for (int64_t k = 0; k < taps.size(); ++k) {
                FeatureTap tap{k, sr.taps[static_cast<size_t>(k)], teacher_taps[static_cast<size_t>(k)]};
                auto latents = encode_pair(bundle, tap);
                const std::array<int64_t, 3> shape{latents.z_teacher.size(1),
                                                   latents.z_teacher.size(2),
                                                   latents.z_teacher.size(3)};
                auto mask = generate_mask(cfg.mixer, latents.z_teacher.size(0), shape,
                                          std::optional<LatentPair>(latents),
                                          mix_seed(cfg.seed, iter, 0x3a5cULL + static_cast<uint64_t>(k)));
                auto enhanced = fuse_and_decode(bundle, latents, mask);
                terms.feat_per_tap.push_back(feature_mixer_loss(enhanced, tap.teacher_feature));
                if (cfg.mixer.ae_loss_enabled)
                    terms.ae_per_tap.push_back(autoencoder_loss(bundle, tap.teacher_feature));
                auto mixed = mixed_forward(teacher, student, bundle, taps, enhanced,
                                           routing[static_cast<size_t>(k)]);
                terms.block_per_tap.push_back(
                    mixed ? std::optional<torch::Tensor>(block_mix_loss(*mixed, teacher_sr, batch.hr,
                                                                        cfg.blockmix))
                          : std::nullopt);
            }
        } else if (cfg.method == Method::AT || cfg.method == Method::FAKD ||
                   cfg.method == Method::FitNet) {
            for (int64_t k = 0; k < taps.size(); ++k) {
                const auto& sf = sr.taps[static_cast<size_t>(k)];
                const auto& tf = teacher_taps[static_cast<size_t>(k)];
                torch::Tensor l;
                if (cfg.method == Method::AT)
                    l = at_loss(sf, tf);
                else if (cfg.method == Method::FAKD)
                    l = fakd_affinity_loss(sf, tf);
                else if (fitnet_adapter)
                    l = fitnet_loss(sf, tf, fitnet_adapter);
                else
                    l = torch::mse_loss(sf, tf);
                terms.feat_per_tap.push_back(l);
            }
        }

        check_finite(terms.rec, "rec", iter);
        check_finite(terms.logits, "logits", iter);
        for (const auto& t : terms.feat_per_tap) check_finite(t, "feat", iter);
        for (const auto& t : terms.ae_per_tap) check_finite(t, "ae", iter);
        for (const auto& t : terms.block_per_tap)
            if (t) check_finite(*t, "block", iter);

        auto total = total_loss(terms, cfg.weights);
        check_finite(total, "total", iter);

        opt.zero_grad();
        total.backward();
        opt.step();

        report.curve.push_back(breakdown(terms, cfg.weights));

        if (cfg.eval_every > 0 && (iter + 1) % cfg.eval_every == 0 && iter + 1 < cfg.iters) {
            student->eval();
            auto er = evaluate_sr(model_fn(student), eval_set, cfg.student_spec.scale,
                                  "eval@" + std::to_string(iter + 1));
            student->train();
            report.final_eval.push_back(std::move(er));
        }
    }

    report.student_ckpt = (fs::path(report.run_dir) / "student.ckpt").string();
    save_model(report.student_ckpt, student, "student", cfg.iters, cfg.seed);
    if (bundle) {
        report.mixer_ckpt = (fs::path(report.run_dir) / "mixer.ckpt").string();
        save_module(report.mixer_ckpt, *bundle,
                    {{"format", "mipkd-checkpoint-v1"}, {"kind", "mixer_bundle"}, {"seed", cfg.seed}});
    }

    student->eval();
    report.final_eval.push_back(evaluate_sr(model_fn(student), eval_set, cfg.student_spec.scale, "eval"));
    report.final_eval.push_back(
        evaluate_bicubic_baseline(eval_set, cfg.student_spec.scale, "bicubic_baseline"));

    report.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    std::ofstream os(fs::path(report.run_dir) / "report.json");
    os << report.to_json().dump(2) << "\n";

    return report;
}

std::vector<RunReport> distill_chain(std::vector<TrainConfig> stages) {
    if (stages.empty()) throw ConfigError("empty distillation chain");
    for (size_t i = 0; i + 1 < stages.size(); ++i) {
        if (!(stages[i].student_spec == stages[i + 1].teacher_spec))
            throw ConfigError("chain stage " + std::to_string(i + 1) +
                              ": teacher spec does not match stage " + std::to_string(i) +
                              " student spec");
        if (stages[i + 1].method == Method::Scratch)
            throw ConfigError("chain stages after the first must use a teacher");
    }
    std::vector<RunReport> reports;
    for (size_t i = 0; i < stages.size(); ++i) {
        if (i > 0) stages[i].teacher_ckpt = reports.back().student_ckpt;
        stages[i].validate();
        reports.push_back(train(stages[i]));
    }
    return reports;
}

std::vector<EvalReport> evaluate(const std::string& ckpt_path,
                                 const std::vector<std::string>& dataset_dirs) {
    std::vector<EvalReport> out;
    if (dataset_dirs.empty()) return out;
    auto model = load_model(ckpt_path);
    model->eval();
    for (const auto& dir : dataset_dirs) {
        auto data = load_hr_directory(dir);
        out.push_back(evaluate_sr(model_fn(model), data, model->spec.scale,
                                  fs::path(dir).filename().string()));
    }
    return out;
}

}  // namespace mipkd
