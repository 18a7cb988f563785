#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fcl/ndcore/tensor.hpp"

namespace fcl::model {

// Flat, versioned container of named parameter tensors. JSON payload with
// row-major values serialized at round-trip precision.
struct Checkpoint {
    int version = 1;
    int round = 0;
    std::vector<std::pair<std::string, nd::Tensor>> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint data into the target tensors; throws CheckpointError on
// any name or shape mismatch.
void load_into(const Checkpoint& ckpt,
               std::vector<std::pair<std::string, nd::Tensor>> target);

// FNV-1a over the raw parameter bytes, for cheap "did anything change" checks.
std::uint64_t params_hash(const std::vector<std::pair<std::string, nd::Tensor>>& named);

}  // namespace fcl::model
