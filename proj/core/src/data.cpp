#include "mipkd/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace mipkd {

namespace {

// cubic convolution kernel, a = -0.5
double cubic_kernel(double t) {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
    if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
    return 0.0;
}

// out x in resampling matrix; kernel widened by the ratio when downscaling,
// edge taps folded into the clamped border sample, rows normalized to sum 1.
torch::Tensor cubic_weight_matrix(int64_t in, int64_t out) {
    auto w = torch::zeros({out, in}, torch::kFloat64);
    auto acc = w.accessor<double, 2>();
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    const double scale = std::max(ratio, 1.0);
    const double support = 2.0 * scale;
    for (int64_t i = 0; i < out; ++i) {
        const double center = (static_cast<double>(i) + 0.5) * ratio - 0.5;
        const auto lo = static_cast<int64_t>(std::ceil(center - support));
        const auto hi = static_cast<int64_t>(std::floor(center + support));
        double sum = 0.0;
        for (int64_t j = lo; j <= hi; ++j) {
            const double v = cubic_kernel((static_cast<double>(j) - center) / scale);
            if (v == 0.0) continue;
            const int64_t jc = std::clamp<int64_t>(j, 0, in - 1);
            acc[i][jc] += v;
            sum += v;
        }
        if (sum != 0.0)
            for (int64_t j = 0; j < in; ++j) acc[i][j] /= sum;
    }
    return w;
}

}  // namespace

torch::Tensor bicubic_resize(const torch::Tensor& image, int64_t out_h, int64_t out_w) {
    if (image.dim() < 2) throw DimensionError("bicubic_resize expects at least 2 dims");
    const int64_t h = image.size(-2), w = image.size(-1);
    if (h < 4 || w < 4) throw DimensionError("bicubic_resize input must be at least 4x4");
    if (out_h < 1 || out_w < 1) throw DimensionError("degenerate output dims");
    auto x = image.to(torch::kFloat64);
    auto wh = cubic_weight_matrix(h, out_h);
    auto ww = cubic_weight_matrix(w, out_w);
    auto y = torch::matmul(torch::matmul(wh, x), ww.t());
    return y.clamp(0.0, 1.0).to(image.scalar_type());
}

std::vector<torch::Tensor> synth_textures(int64_t count, int64_t size, uint64_t seed) {
    if (size < 32) throw ConfigError("synthetic texture size must be >= 32");
    std::vector<torch::Tensor> images;
    images.reserve(static_cast<size_t>(count));
    for (int64_t n = 0; n < count; ++n) {
        RngStream rng(mix_seed(seed, static_cast<uint64_t>(n)));
        auto img = torch::zeros({3, size, size}, torch::kFloat64);
        auto acc = img.accessor<double, 3>();
        const auto kind = rng.next_below(3);
        if (kind == 0) {
            // sum of oriented sinusoidal gratings with per-channel color weights
            const int n_waves = 2 + static_cast<int>(rng.next_below(3));
            for (int wv = 0; wv < n_waves; ++wv) {
                const double freq = 0.05 + 0.4 * rng.next_double();
                const double theta = 2.0 * M_PI * rng.next_double();
                const double phase = 2.0 * M_PI * rng.next_double();
                const double kx = freq * std::cos(theta), ky = freq * std::sin(theta);
                double cw[3] = {0.3 + rng.next_double(), 0.3 + rng.next_double(),
                                0.3 + rng.next_double()};
                for (int64_t y = 0; y < size; ++y)
                    for (int64_t x = 0; x < size; ++x) {
                        const double v = std::sin(2.0 * M_PI * (kx * x + ky * y) + phase);
                        for (int c = 0; c < 3; ++c) acc[c][y][x] += cw[c] * v;
                    }
            }
        } else if (kind == 1) {
            const auto cell = 2 + static_cast<int64_t>(rng.next_below(7));
            double ca[3], cb[3];
            for (int c = 0; c < 3; ++c) {
                ca[c] = rng.next_double();
                cb[c] = rng.next_double();
            }
            for (int64_t y = 0; y < size; ++y)
                for (int64_t x = 0; x < size; ++x) {
                    const bool on = ((x / cell) + (y / cell)) % 2 == 0;
                    for (int c = 0; c < 3; ++c)
                        acc[c][y][x] = (on ? ca[c] : cb[c]) + 0.05 * (rng.next_double() - 0.5);
                }
        } else {
            // low-pass filtered noise
            for (int c = 0; c < 3; ++c)
                for (int64_t y = 0; y < size; ++y)
                    for (int64_t x = 0; x < size; ++x) acc[c][y][x] = rng.next_double();
            auto k = torch::ones({3, 1, 5, 5}, torch::kFloat64) / 25.0;
            img = torch::conv2d(img.unsqueeze(0), k, {}, 1, 2, 1, 3).squeeze(0);
        }
        // rescale to full [0,1] dynamic range
        const auto mn = img.min();
        const auto mx = img.max();
        img = (img - mn) / (mx - mn).clamp_min(1e-12);
        images.push_back(img.to(torch::kFloat32));
    }
    return images;
}

Dataset load_hr_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    Dataset out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        auto ext = e.path().extension().string();
        if (ext == ".png" || ext == ".PNG") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        cv::Mat bgr = cv::imread(p.string(), cv::IMREAD_COLOR);
        if (bgr.empty() || !bgr.isContinuous())
            throw ConfigError("failed to read image: " + p.string());
        auto t = torch::from_blob(bgr.data, {bgr.rows, bgr.cols, 3}, torch::kUInt8).clone();
        t = t.permute({2, 0, 1}).flip(0).contiguous();  // BGR -> RGB
        out.hr_images.push_back(t.to(torch::kFloat32) / 255.0f);
        out.ids.push_back(p.stem().string());
    }
    if (out.hr_images.empty()) throw ConfigError("no PNG images found in " + dir);
    return out;
}

Dataset load_dataset(const DatasetSpec& spec) {
    if (spec.source == DatasetSpec::Source::Directory) return load_hr_directory(spec.hr_dir);
    Dataset out;
    out.hr_images = synth_textures(spec.synth_count, spec.synth_size, spec.synth_seed);
    for (int64_t i = 0; i < spec.synth_count; ++i)
        out.ids.push_back("synth_" + std::to_string(i));
    return out;
}

void write_png(const std::string& path, const torch::Tensor& image) {
    auto u8 = (image.clamp(0, 1) * 255.0f)
                  .round()
                  .to(torch::kUInt8)
                  .flip(0)  // RGB -> BGR
                  .permute({1, 2, 0})
                  .contiguous();
    cv::Mat bgr(static_cast<int>(u8.size(0)), static_cast<int>(u8.size(1)), CV_8UC3, u8.data_ptr());
    if (!cv::imwrite(path, bgr)) throw ConfigError("failed to write image: " + path);
}

torch::Tensor dihedral_transform(const torch::Tensor& image, int index) {
    const int rot = index & 3;
    auto out = rot == 0 ? image : torch::rot90(image, rot, {-2, -1});
    if (index & 4) out = out.flip(-1);
    return out.contiguous();
}

int dihedral_inverse(int index) {
    if (index & 4) return index;  // flipped variants are involutions
    return (4 - (index & 3)) % 4;
}

PatchBatch sample_batch(const Dataset& data, const DatasetSpec& spec, int64_t batch,
                        RngStream& rng) {
    if (data.hr_images.empty()) throw ConfigError("dataset is empty");
    const int64_t p = spec.patch_size_lr;
    const int64_t sp = p * spec.scale;
    std::vector<int64_t> usable;
    for (size_t i = 0; i < data.hr_images.size(); ++i) {
        const auto& img = data.hr_images[i];
        if (img.size(1) >= sp && img.size(2) >= sp)
            usable.push_back(static_cast<int64_t>(i));
        else
            std::cerr << "warning: image " << data.ids[i] << " smaller than patch, skipped\n";
    }
    if (usable.empty()) throw ConfigError("all images smaller than the requested patch size");

    std::vector<torch::Tensor> lrs, hrs;
    PatchBatch out;
    for (int64_t b = 0; b < batch; ++b) {
        const int64_t idx = usable[rng.next_below(usable.size())];
        const auto& img = data.hr_images[static_cast<size_t>(idx)];
        const int64_t y0 = static_cast<int64_t>(rng.next_below(img.size(1) - sp + 1));
        const int64_t x0 = static_cast<int64_t>(rng.next_below(img.size(2) - sp + 1));
        auto hr = img.index({torch::indexing::Slice(), torch::indexing::Slice(y0, y0 + sp),
                             torch::indexing::Slice(x0, x0 + sp)});
        const int t = spec.augment ? static_cast<int>(rng.next_below(8)) : 0;
        hr = dihedral_transform(hr, t);
        lrs.push_back(bicubic_resize(hr, p, p));
        hrs.push_back(hr);
        out.indices.push_back(idx);
    }
    out.lr = torch::stack(lrs);
    out.hr = torch::stack(hrs);
    return out;
}

}  // namespace mipkd
