#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

#include "mipkd/errors.hpp"
#include "mipkd/rng.hpp"

namespace mipkd {

/// Separable cubic-convolution resize, a = -0.5, anti-aliased when downscaling,
/// replicate edge handling, output clipped to [0,1]. Accepts ...xHxW (trailing
/// two dims are resized).
torch::Tensor bicubic_resize(const torch::Tensor& image, int64_t out_h, int64_t out_w);

/// Deterministic procedural HR images (3 x size x size in [0,1]): mixed sinusoidal
/// gratings, checkerboards, and low-pass filtered noise, rescaled to full dynamic range.
std::vector<torch::Tensor> synth_textures(int64_t count, int64_t size, uint64_t seed);

struct DatasetSpec {
    enum class Source { Directory, Synthetic };
    Source source = Source::Synthetic;
    std::string hr_dir;
    int64_t scale = 2;
    int64_t patch_size_lr = 48;
    bool augment = true;
    int64_t synth_count = 32;
    int64_t synth_size = 96;
    uint64_t synth_seed = 7;
};

struct Dataset {
    std::vector<torch::Tensor> hr_images;  // 3 x H x W in [0,1]
    std::vector<std::string> ids;
};

Dataset load_dataset(const DatasetSpec& spec);
Dataset load_hr_directory(const std::string& dir);
void write_png(const std::string& path, const torch::Tensor& image);

struct PatchBatch {
    torch::Tensor lr;  // B x 3 x p x p
    torch::Tensor hr;  // B x 3 x sp x sp
    std::vector<int64_t> indices;
};

/// LR patches come from degrading the cropped (and augmented) HR region, so LR/HR
/// are exactly aligned. Identical rng state yields identical batches.
PatchBatch sample_batch(const Dataset& data, const DatasetSpec& spec, int64_t batch, RngStream& rng);

/// The 8 dihedral transforms (identity, rot90/180/270, flips, transposes), index 0..7.
/// Transform 0 is the identity; dihedral_inverse gives the inverse index.
torch::Tensor dihedral_transform(const torch::Tensor& image, int index);
int dihedral_inverse(int index);

}  // namespace mipkd
