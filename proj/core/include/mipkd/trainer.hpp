#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mipkd/config.hpp"
#include "mipkd/metrics.hpp"

namespace mipkd {

struct RunReport {
    nlohmann::json config;
    std::vector<LossBreakdown> curve;  // one breakdown per iteration
    std::vector<EvalReport> final_eval;
    std::string student_ckpt;
    std::string mixer_ckpt;  // empty unless method == mipkd
    std::string run_dir;
    double wall_clock_sec = 0;

    nlohmann::json to_json() const;
};

/// Learning rate at an iteration: lr * decay^floor(iter / decay_every).
double lr_at(int64_t iter, const TrainConfig& cfg);

/// One full training run. Deterministic given (config, seed); aborts with a
/// diagnostic naming the offending term and iteration on NaN/Inf.
RunReport train(const TrainConfig& cfg);

/// Sequential stages; stage i's trained student becomes stage i+1's teacher.
/// The chain is validated before any training starts.
std::vector<RunReport> distill_chain(std::vector<TrainConfig> stages);

/// Evaluate a checkpoint over named HR directories.
std::vector<EvalReport> evaluate(const std::string& ckpt_path,
                                 const std::vector<std::string>& dataset_dirs);

}  // namespace mipkd
