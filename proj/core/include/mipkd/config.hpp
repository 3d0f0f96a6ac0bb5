#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mipkd/backbones.hpp"
#include "mipkd/blockmix.hpp"
#include "mipkd/data.hpp"
#include "mipkd/losses.hpp"
#include "mipkd/mixer.hpp"

namespace mipkd {

enum class Method { Scratch, Logits, AT, FitNet, FAKD, MiPKD };

std::string method_name(Method m);
Method method_from_name(const std::string& s);

struct TrainConfig {
    Method method = Method::MiPKD;
    NetworkSpec teacher_spec;
    NetworkSpec student_spec;
    std::string teacher_ckpt;  // required unless method == Scratch
    MixerConfig mixer;
    BlockMixConfig blockmix;
    LossWeights weights;
    int64_t n_taps = 4;

    double adam_beta1 = 0.9, adam_beta2 = 0.99, adam_eps = 1e-8;
    double lr = 1e-4;
    int64_t lr_decay_every = 100000;
    double lr_decay_factor = 0.1;
    int64_t iters = 2000;
    int64_t batch = 16;
    uint64_t seed = 1;
    int64_t eval_every = 0;  // 0 = evaluate at the end only

    DatasetSpec dataset;
    std::string eval_dir;  // optional held-out HR directory; empty = fresh synthetic set
    std::string out_dir = "runs";

    void validate() const;
    std::string run_name() const;  // <method>_<arch>_<scale>x_<seed>
};

/// Parse from JSON; unknown keys rejected. `MIPKD_SEED` env var overrides the seed.
TrainConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// "a.b.c=value" applied onto the JSON document before parsing.
void apply_override(nlohmann::json& j, const std::string& kv);

}  // namespace mipkd
