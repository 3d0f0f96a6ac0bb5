#pragma once

#include <torch/torch.h>

#include <functional>
#include <string>
#include <vector>

#include "mipkd/data.hpp"

namespace mipkd {

/// ITU-R BT.601 studio-swing luma: Y = (65.481 R + 128.553 G + 24.966 B + 16) / 255.
torch::Tensor rgb_to_y(const torch::Tensor& image);

/// 10 log10(max^2 / MSE), capped at 100 dB when MSE < 1e-10.
double psnr(const torch::Tensor& a, const torch::Tensor& b, double max_val = 1.0);

/// Single-scale SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03, L=1,
/// valid windows only. Inputs 1 x H x W with H, W >= 11.
double ssim(const torch::Tensor& a, const torch::Tensor& b);

struct EvalReport {
    struct PerImage {
        std::string id;
        double psnr_db;
        double ssim;
    };
    std::string dataset;
    std::vector<PerImage> per_image;
    double mean_psnr = 0;
    double mean_ssim = 0;
    int64_t scale = 0;
    int64_t border_crop = 0;
};

using SRFunction = std::function<torch::Tensor(const torch::Tensor& lr_batch)>;

/// LR inputs are bicubic degradations of the HR images (cropped to a multiple of
/// scale); metrics on the Y channel after cropping `scale` pixels per side.
EvalReport evaluate_sr(const SRFunction& sr_fn, const Dataset& dataset, int64_t scale,
                       const std::string& dataset_name);

/// Bicubic-upsampling baseline evaluated under the identical protocol.
EvalReport evaluate_bicubic_baseline(const Dataset& dataset, int64_t scale,
                                     const std::string& dataset_name);

std::string report_to_csv(const EvalReport& report);
std::string report_to_markdown(const std::vector<EvalReport>& reports);

}  // namespace mipkd
