#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fcl/data/dataset.hpp"
#include "fcl/ndcore/rng.hpp"
#include "fcl/ndcore/tensor.hpp"

namespace fcl::augment {

// Strong augmentation distribution T for training views. Transforms never
// change the tensor shape (crops pad back) and outputs stay in [0,1].
struct PipelineConfig {
    std::size_t crop_pad = 4;  // random crop offset range; 0 disables
    nd::real flip_p = 0.5;
    nd::real jitter = 0.4;  // brightness/contrast/saturation strength; 0 disables
    nd::real gray_p = 0.1;
};

// Deterministic weak augmentation for importance scoring. No randomness:
// the score must be a pure function of the input image.
enum class WeakAug { HFlip, Crop, Grayscale, Jitter };

WeakAug parse_weak_aug(const std::string& name);
std::string weak_aug_name(WeakAug m);

// Sample pixels as a [C,H,W] tensor (no grad).
nd::Tensor to_tensor(const data::Sample& s, std::size_t c, std::size_t h, std::size_t w);

// One draw t ~ T applied to x. Consumes the rng deterministically (the same
// rng state always yields the same view).
nd::Tensor strong_view(const data::Sample& s, const PipelineConfig& cfg, nd::Rng& rng,
                       std::size_t c, std::size_t h, std::size_t w);

// Two independent draws (t, t') for the positive pair.
std::pair<nd::Tensor, nd::Tensor> strong_views(const data::Sample& s, const PipelineConfig& cfg,
                                               nd::Rng& rng, std::size_t c, std::size_t h,
                                               std::size_t w);

// Pure function of (x, method); bitwise identical on repeated calls.
nd::Tensor weak_view(const data::Sample& s, WeakAug method, std::size_t c, std::size_t h,
                     std::size_t w);

}  // namespace fcl::augment
