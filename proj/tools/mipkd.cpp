#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mipkd/checkpoint.hpp"
#include "mipkd/trainer.hpp"

namespace fs = std::filesystem;
using namespace mipkd;

namespace {

void print_eval(const std::vector<EvalReport>& reports) {
    std::cout << report_to_markdown(reports);
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides) {
    auto cfg = load_config(config_path, overrides);
    std::cout << "training " << cfg.run_name() << " (" << cfg.iters << " iters)\n";
    auto report = train(cfg);
    std::cout << "run dir: " << report.run_dir << "\n";
    std::cout << "final total loss: " << report.curve.back().total << "\n";
    print_eval(report.final_eval);
    return 0;
}

int cmd_chain(const std::string& config_path, const std::vector<std::string>& overrides) {
    std::ifstream is(config_path);
    if (!is) throw ConfigError("cannot open config: " + config_path);
    nlohmann::json j = nlohmann::json::parse(is);
    if (!j.contains("stages") || !j["stages"].is_array())
        throw ConfigError("chain config must contain a \"stages\" array");
    std::vector<TrainConfig> stages;
    for (auto stage : j["stages"]) {
        for (const auto& kv : overrides) apply_override(stage, kv);
        stages.push_back(config_from_json(stage));
    }
    auto reports = distill_chain(std::move(stages));
    for (size_t i = 0; i < reports.size(); ++i) {
        std::cout << "stage " << i << ": " << reports[i].run_dir << "\n";
        print_eval(reports[i].final_eval);
    }
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::vector<std::string>& dirs) {
    auto reports = evaluate(ckpt, dirs);
    for (const auto& r : reports) std::cout << report_to_csv(r);
    print_eval(reports);
    return 0;
}

int cmd_make_data(int64_t count, int64_t size, uint64_t seed, const std::string& out) {
    fs::create_directories(out);
    auto images = synth_textures(count, size, seed);
    for (size_t i = 0; i < images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "synth_%04zu.png", i);
        write_png((fs::path(out) / name).string(), images[i]);
    }
    std::cout << "wrote " << images.size() << " images to " << out << "\n";
    return 0;
}

int cmd_report(const std::string& runs_dir) {
    nlohmann::json rows = nlohmann::json::array();
    std::ostringstream csv;
    csv << "run,method,dataset,mean_psnr,mean_ssim,wall_clock_sec\n";
    std::ostringstream md;
    md << "| Run | Dataset | PSNR (dB) | SSIM |\n|---|---|---|---|\n";
    for (const auto& e : fs::recursive_directory_iterator(runs_dir)) {
        if (e.path().filename() != "report.json") continue;
        std::ifstream is(e.path());
        auto j = nlohmann::json::parse(is);
        const auto run = e.path().parent_path().filename().string();
        for (const auto& ev : j["final_eval"]) {
            csv << run << "," << j["config"]["method"].get<std::string>() << ","
                << ev["dataset"].get<std::string>() << "," << ev["mean_psnr"].get<double>() << ","
                << ev["mean_ssim"].get<double>() << "," << j["wall_clock_sec"].get<double>() << "\n";
            char psnr[32], ssim[32];
            std::snprintf(psnr, sizeof(psnr), "%.4f", ev["mean_psnr"].get<double>());
            std::snprintf(ssim, sizeof(ssim), "%.4f", ev["mean_ssim"].get<double>());
            md << "| " << run << " | " << ev["dataset"].get<std::string>() << " | " << psnr
               << " | " << ssim << " |\n";
        }
    }
    std::ofstream(fs::path(runs_dir) / "summary.csv") << csv.str();
    std::ofstream(fs::path(runs_dir) / "summary.md") << md.str();
    std::cout << md.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MiPKD: mixture-of-priors knowledge distillation for image super-resolution"};
    app.require_subcommand(1);

    std::string config_path, ckpt_path, out_dir, runs_dir;
    std::vector<std::string> overrides, data_dirs;
    int64_t count = 32, size = 96;
    uint64_t seed = 7;

    auto* train_cmd = app.add_subcommand("train", "run one training configuration");
    train_cmd->add_option("--config", config_path, "JSON config file")->required();
    train_cmd->add_option("--override", overrides, "key=value overrides (dotted paths)");

    auto* chain_cmd = app.add_subcommand("chain", "multi-stage teaching-assistant distillation");
    chain_cmd->add_option("--config", config_path, "JSON config with a stages array")->required();
    chain_cmd->add_option("--override", overrides, "key=value overrides applied to every stage");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on HR directories");
    eval_cmd->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
    eval_cmd->add_option("--data", data_dirs, "HR PNG directories")->required();

    auto* make_cmd = app.add_subcommand("make-data", "generate the synthetic HR dataset");
    make_cmd->add_option("--count", count, "number of images");
    make_cmd->add_option("--size", size, "image side length");
    make_cmd->add_option("--seed", seed, "generator seed");
    make_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* report_cmd = app.add_subcommand("report", "aggregate run reports to CSV + markdown");
    report_cmd->add_option("--runs", runs_dir, "directory containing run subdirectories")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) return cmd_train(config_path, overrides);
        if (*chain_cmd) return cmd_chain(config_path, overrides);
        if (*eval_cmd) return cmd_eval(ckpt_path, data_dirs);
        if (*make_cmd) return cmd_make_data(count, size, seed, out_dir);
        if (*report_cmd) return cmd_report(runs_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
