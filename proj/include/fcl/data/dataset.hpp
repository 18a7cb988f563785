#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "fcl/ndcore/kernels.hpp"

namespace fcl::data {

// One image. Pixels are C*H*W row-major per channel, values in [0,1].
// The label rides along for evaluation and stream ordering only; the coreset
// and fed layers never look at it.
struct Sample {
    std::vector<float> pixels;
    std::optional<int> label;
    std::int64_t id = -1;
};

struct Dataset {
    std::vector<Sample> samples;
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    int num_classes = 0;

    std::size_t pixel_count() const { return channels * height * width; }
};

// CIFAR-10 binary batches: records of 3073 bytes, [label][1024 R][1024 G][1024 B],
// pixels scaled by 1/255 into 3x32x32. Throws FormatError on truncation (with
// the byte offset) and on label bytes > 9.
Dataset load_cifar10(const std::filesystem::path& path,
                     std::optional<std::size_t> max_records = std::nullopt);

// Writes samples back out in the same binary format. Requires 3x32x32 shape
// and labels on every sample.
void save_cifar10(const Dataset& ds, const std::filesystem::path& path);

// Synthetic stand-in for CIFAR at desk scale: per class one fixed random
// template image plus i.i.d. Gaussian pixel noise, clamped to [0,1].
// Deterministic per (seed, noise_stream). Templates depend on `seed` only,
// so two calls with distinct noise_stream values give disjoint i.i.d. draws
// from the same class distributions (train/test splits).
Dataset gen_synthetic(int num_classes, int per_class, int side, nd::real noise_sigma,
                      std::uint64_t seed, std::uint64_t noise_stream = 0);

}  // namespace fcl::data
