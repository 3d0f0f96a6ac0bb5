#pragma once

#include <torch/torch.h>

#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "mipkd/backbones.hpp"

namespace mipkd {

/// On-disk checkpoint: "MPKD1\n", u64 manifest length, manifest JSON (UTF-8),
/// u64 tensor count, then per tensor: u32 name length, name, u32 ndim,
/// i64 dims..., raw little-endian float32 data. Round trips bit-exactly.
struct Checkpoint {
    nlohmann::json manifest;
    std::map<std::string, torch::Tensor> tensors;  // float32, contiguous
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Manifest carries the NetworkSpec plus run metadata (iteration, seed, role).
Checkpoint model_checkpoint(const SRModel& model, const std::string& role, int64_t iteration,
                            uint64_t seed);
void save_model(const std::string& path, const SRModel& model, const std::string& role,
                int64_t iteration, uint64_t seed);
SRModel load_model(const std::string& path);
SRModel model_from_checkpoint(const Checkpoint& ckpt);

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

/// Copy a named-tensor map into any module's parameters (used for mixer bundles).
void save_module(const std::string& path, const torch::nn::Module& module,
                 const nlohmann::json& manifest);
void load_into_module(const std::string& path, torch::nn::Module& module);

}  // namespace mipkd
