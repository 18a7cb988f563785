#pragma once

#include <cstdint>
#include <vector>

#include "fcl/data/dataset.hpp"
#include "fcl/model/encoder.hpp"
#include "fcl/ndcore/rng.hpp"

namespace fcl::eval {

struct ProbeConfig {
    nd::real label_fraction = 0.1;  // in (0, 1]
    int epochs = 50;
    nd::real lr = 0.01;
    std::size_t batch = 128;
    std::uint64_t seed = 0;
};

// Per-class stratified subsample: ceil(fraction * class count), at least one
// per class. Throws StratificationError when a class has no samples.
std::vector<std::size_t> stratified_indices(const std::vector<int>& labels, int num_classes,
                                            nd::real fraction, nd::Rng& rng);

// Frozen-encoder features [n, D] (inference forwards in chunks).
nd::Tensor extract_features(const model::Encoder& encoder, const data::Dataset& ds);

// Trains a single linear layer D -> num_classes with softmax cross-entropy
// on the given features and returns top-1 accuracy on the test features.
nd::real linear_probe_features(const nd::Tensor& train_features,
                               const std::vector<int>& train_labels,
                               const nd::Tensor& test_features,
                               const std::vector<int>& test_labels, int num_classes,
                               const ProbeConfig& cfg);

// Full protocol: stratified label subsample at cfg.label_fraction, probe on
// frozen encoder features, accuracy on the held-out test set. The encoder is
// never mutated (parameters are hash-checked by callers/tests).
nd::real linear_probe(const model::Encoder& encoder, const data::Dataset& train,
                      const data::Dataset& test, const ProbeConfig& cfg);

}  // namespace fcl::eval
