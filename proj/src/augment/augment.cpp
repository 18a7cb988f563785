#include "fcl/augment/augment.hpp"

#include <algorithm>
#include <cmath>

#include "fcl/errors.hpp"

namespace fcl::augment {

namespace {

using nd::real;
using nd::Tensor;

constexpr real kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;
// Fixed brightness factor of the deterministic jitter weak view.
constexpr real kWeakJitterFactor = 1.2;
// Border width of the deterministic center-crop weak view.
constexpr std::size_t kWeakCropBorder = 4;

void hflip_inplace(real* px, std::size_t c, std::size_t h, std::size_t w) {
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y) {
            real* row = px + (ch * h + y) * w;
            std::reverse(row, row + w);
        }
}

// Shift by (dy, dx) with zero fill; equivalent to pad-then-crop.
void shift_crop(const real* src, real* dst, std::size_t c, std::size_t h, std::size_t w,
                std::ptrdiff_t dy, std::ptrdiff_t dx) {
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const std::ptrdiff_t sy = std::ptrdiff_t(y) + dy;
                const std::ptrdiff_t sx = std::ptrdiff_t(x) + dx;
                real v = 0;
                if (sy >= 0 && sy < std::ptrdiff_t(h) && sx >= 0 && sx < std::ptrdiff_t(w))
                    v = src[(ch * h + std::size_t(sy)) * w + std::size_t(sx)];
                dst[(ch * h + y) * w + x] = v;
            }
}

void grayscale_inplace(real* px, std::size_t c, std::size_t h, std::size_t w) {
    if (c != 3) return;
    const std::size_t plane = h * w;
    for (std::size_t p = 0; p < plane; ++p) {
        const real luma = kLumaR * px[p] + kLumaG * px[plane + p] + kLumaB * px[2 * plane + p];
        px[p] = luma;
        px[plane + p] = luma;
        px[2 * plane + p] = luma;
    }
}

void clamp01(real* px, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) px[i] = std::clamp(px[i], real(0), real(1));
}

void brightness_inplace(real* px, std::size_t n, real f) {
    if (f == real(1)) return;
    for (std::size_t i = 0; i < n; ++i) px[i] *= f;
    clamp01(px, n);
}

void contrast_inplace(real* px, std::size_t n, real f) {
    if (f == real(1)) return;
    real mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += px[i];
    mean /= real(n);
    for (std::size_t i = 0; i < n; ++i) px[i] = mean + (px[i] - mean) * f;
    clamp01(px, n);
}

void saturation_inplace(real* px, std::size_t c, std::size_t h, std::size_t w, real f) {
    if (f == real(1) || c != 3) return;
    const std::size_t plane = h * w;
    for (std::size_t p = 0; p < plane; ++p) {
        const real luma = kLumaR * px[p] + kLumaG * px[plane + p] + kLumaB * px[2 * plane + p];
        for (std::size_t ch = 0; ch < 3; ++ch) {
            real& v = px[ch * plane + p];
            v = luma + (v - luma) * f;
        }
    }
    clamp01(px, c * plane);
}

}  // namespace

WeakAug parse_weak_aug(const std::string& name) {
    if (name == "hflip") return WeakAug::HFlip;
    if (name == "crop") return WeakAug::Crop;
    if (name == "grayscale") return WeakAug::Grayscale;
    if (name == "jitter") return WeakAug::Jitter;
    throw ConfigError("augment: unknown weak augmentation '" + name + "'");
}

std::string weak_aug_name(WeakAug m) {
    switch (m) {
        case WeakAug::HFlip: return "hflip";
        case WeakAug::Crop: return "crop";
        case WeakAug::Grayscale: return "grayscale";
        case WeakAug::Jitter: return "jitter";
    }
    return "?";
}

Tensor to_tensor(const data::Sample& s, std::size_t c, std::size_t h, std::size_t w) {
    if (s.pixels.size() != c * h * w)
        throw DimensionError("augment: sample has " + std::to_string(s.pixels.size()) +
                             " pixels, expected " + std::to_string(c * h * w));
    Tensor t = Tensor::zeros({c, h, w});
    for (std::size_t i = 0; i < s.pixels.size(); ++i) t.at(i) = real(s.pixels[i]);
    return t;
}

Tensor strong_view(const data::Sample& s, const PipelineConfig& cfg, nd::Rng& rng, std::size_t c,
                   std::size_t h, std::size_t w) {
    Tensor t = to_tensor(s, c, h, w);
    const std::size_t n = t.size();

    // Fixed draw order regardless of which transforms fire.
    const std::size_t span = 2 * cfg.crop_pad + 1;
    const std::ptrdiff_t dy = std::ptrdiff_t(rng.index(span)) - std::ptrdiff_t(cfg.crop_pad);
    const std::ptrdiff_t dx = std::ptrdiff_t(rng.index(span)) - std::ptrdiff_t(cfg.crop_pad);
    const bool flip = rng.bernoulli(double(cfg.flip_p));
    const real fb = real(rng.uniform(1.0 - double(cfg.jitter), 1.0 + double(cfg.jitter)));
    const real fc = real(rng.uniform(1.0 - double(cfg.jitter), 1.0 + double(cfg.jitter)));
    const real fs = real(rng.uniform(1.0 - double(cfg.jitter), 1.0 + double(cfg.jitter)));
    const bool gray = rng.bernoulli(double(cfg.gray_p));

    if (dy != 0 || dx != 0) {
        Tensor shifted = Tensor::zeros({c, h, w});
        shift_crop(t.data(), shifted.data(), c, h, w, dy, dx);
        t = shifted;
    }
    if (flip) hflip_inplace(t.data(), c, h, w);
    brightness_inplace(t.data(), n, fb);
    contrast_inplace(t.data(), n, fc);
    saturation_inplace(t.data(), c, h, w, fs);
    if (gray) grayscale_inplace(t.data(), c, h, w);
    return t;
}

std::pair<Tensor, Tensor> strong_views(const data::Sample& s, const PipelineConfig& cfg,
                                       nd::Rng& rng, std::size_t c, std::size_t h, std::size_t w) {
    Tensor v1 = strong_view(s, cfg, rng, c, h, w);
    Tensor v2 = strong_view(s, cfg, rng, c, h, w);
    return {std::move(v1), std::move(v2)};
}

Tensor weak_view(const data::Sample& s, WeakAug method, std::size_t c, std::size_t h,
                 std::size_t w) {
    Tensor t = to_tensor(s, c, h, w);
    switch (method) {
        case WeakAug::HFlip:
            hflip_inplace(t.data(), c, h, w);
            break;
        case WeakAug::Crop: {
            // Center crop to (h-2b)x(w-2b) and zero-pad back: the border ring
            // is zeroed, the center is untouched.
            const std::size_t b = std::min({kWeakCropBorder, h / 2, w / 2});
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x)
                        if (y < b || y >= h - b || x < b || x >= w - b)
                            t.at((ch * h + y) * w + x) = 0;
            break;
        }
        case WeakAug::Grayscale:
            grayscale_inplace(t.data(), c, h, w);
            break;
        case WeakAug::Jitter:
            brightness_inplace(t.data(), t.size(), kWeakJitterFactor);
            break;
    }
    return t;
}

}  // namespace fcl::augment
