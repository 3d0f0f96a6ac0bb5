#include "mipkd/metrics.hpp"

#include <cmath>
#include <sstream>

namespace mipkd {

torch::Tensor rgb_to_y(const torch::Tensor& image) {
    if (image.dim() < 3 || image.size(-3) != 3) throw DimensionError("rgb_to_y expects ...x3xHxW");
    auto x = image.to(torch::kFloat64);
    auto r = x.select(-3, 0), g = x.select(-3, 1), b = x.select(-3, 2);
    auto y = (65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0;
    return y.unsqueeze(-3);
}

double psnr(const torch::Tensor& a, const torch::Tensor& b, double max_val) {
    if (!a.sizes().equals(b.sizes())) throw DimensionError("psnr shape mismatch");
    const double mse =
        (a.to(torch::kFloat64) - b.to(torch::kFloat64)).pow(2).mean().item<double>();
    if (mse < 1e-10) return 100.0;
    return 10.0 * std::log10(max_val * max_val / mse);
}

namespace {

torch::Tensor gaussian_window(int64_t size, double sigma) {
    auto coords = torch::arange(size, torch::kFloat64) - static_cast<double>(size - 1) / 2.0;
    auto g = torch::exp(-coords.pow(2) / (2.0 * sigma * sigma));
    g /= g.sum();
    return torch::matmul(g.unsqueeze(1), g.unsqueeze(0)).view({1, 1, size, size});
}

}  // namespace

double ssim(const torch::Tensor& a, const torch::Tensor& b) {
    if (!a.sizes().equals(b.sizes())) throw DimensionError("ssim shape mismatch");
    if (a.dim() != 3 || a.size(0) != 1) throw DimensionError("ssim expects 1xHxW");
    if (a.size(1) < 11 || a.size(2) < 11) throw DimensionError("ssim needs at least 11x11 images");
    constexpr double k1 = 0.01, k2 = 0.03, dyn = 1.0;
    const double c1 = (k1 * dyn) * (k1 * dyn);
    const double c2 = (k2 * dyn) * (k2 * dyn);
    auto win = gaussian_window(11, 1.5);
    auto x = a.to(torch::kFloat64).unsqueeze(0);
    auto y = b.to(torch::kFloat64).unsqueeze(0);
    auto mu_x = torch::conv2d(x, win);
    auto mu_y = torch::conv2d(y, win);
    auto sigma_x = torch::conv2d(x * x, win) - mu_x * mu_x;
    auto sigma_y = torch::conv2d(y * y, win) - mu_y * mu_y;
    auto sigma_xy = torch::conv2d(x * y, win) - mu_x * mu_y;
    auto num = (2.0 * mu_x * mu_y + c1) * (2.0 * sigma_xy + c2);
    auto den = (mu_x * mu_x + mu_y * mu_y + c1) * (sigma_x + sigma_y + c2);
    return (num / den).mean().item<double>();
}

namespace {

EvalReport evaluate_impl(const SRFunction& sr_fn, const Dataset& dataset, int64_t scale,
                         const std::string& dataset_name) {
    if (dataset.hr_images.empty()) throw ConfigError("evaluation dataset is empty");
    EvalReport report;
    report.dataset = dataset_name;
    report.scale = scale;
    report.border_crop = scale;
    double sum_psnr = 0, sum_ssim = 0;
    for (size_t i = 0; i < dataset.hr_images.size(); ++i) {
        auto hr = dataset.hr_images[i];
        const int64_t h = hr.size(1) / scale * scale;
        const int64_t w = hr.size(2) / scale * scale;
        hr = hr.index({torch::indexing::Slice(), torch::indexing::Slice(0, h),
                       torch::indexing::Slice(0, w)});
        auto lr = bicubic_resize(hr, h / scale, w / scale);
        torch::Tensor sr;
        {
            torch::NoGradGuard ng;
            sr = sr_fn(lr.unsqueeze(0)).squeeze(0).clamp(0, 1);
        }
        if (sr.size(1) != h || sr.size(2) != w)
            throw DimensionError("SR output dims do not match scale x input");
        const int64_t bc = scale;
        auto crop = [&](const torch::Tensor& t) {
            return t.index({torch::indexing::Slice(), torch::indexing::Slice(bc, h - bc),
                            torch::indexing::Slice(bc, w - bc)});
        };
        auto y_sr = rgb_to_y(crop(sr));
        auto y_hr = rgb_to_y(crop(hr));
        const double p = psnr(y_sr, y_hr, 1.0);
        const double s = ssim(y_sr, y_hr);
        report.per_image.push_back({dataset.ids[i], p, s});
        sum_psnr += p;
        sum_ssim += s;
    }
    report.mean_psnr = sum_psnr / static_cast<double>(report.per_image.size());
    report.mean_ssim = sum_ssim / static_cast<double>(report.per_image.size());
    return report;
}

}  // namespace

EvalReport evaluate_sr(const SRFunction& sr_fn, const Dataset& dataset, int64_t scale,
                       const std::string& dataset_name) {
    return evaluate_impl(sr_fn, dataset, scale, dataset_name);
}

EvalReport evaluate_bicubic_baseline(const Dataset& dataset, int64_t scale,
                                     const std::string& dataset_name) {
    auto fn = [scale](const torch::Tensor& lr) {
        return bicubic_resize(lr, lr.size(-2) * scale, lr.size(-1) * scale);
    };
    return evaluate_impl(fn, dataset, scale, dataset_name);
}

std::string report_to_csv(const EvalReport& report) {
    std::ostringstream os;
    os << "dataset,id,psnr_db,ssim\n";
    os.precision(6);
    os << std::fixed;
    for (const auto& row : report.per_image)
        os << report.dataset << "," << row.id << "," << row.psnr_db << "," << row.ssim << "\n";
    os << report.dataset << ",mean," << report.mean_psnr << "," << report.mean_ssim << "\n";
    return os.str();
}

std::string report_to_markdown(const std::vector<EvalReport>& reports) {
    std::ostringstream os;
    os << "| Dataset | Scale | PSNR (dB) | SSIM |\n|---|---|---|---|\n";
    os.precision(4);
    os << std::fixed;
    for (const auto& r : reports)
        os << "| " << r.dataset << " | x" << r.scale << " | " << r.mean_psnr << " | " << r.mean_ssim
           << " |\n";
    return os.str();
}

}  // namespace mipkd
