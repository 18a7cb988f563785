#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcl/ndcore/kernels.hpp"

namespace fcl::cli {

struct DatasetConfig {
    std::string kind = "synthetic";  // synthetic | cifar10
    // synthetic
    int classes = 4;
    int per_class = 1600;
    int side = 16;
    nd::real noise_sigma = 0.45;
    int test_per_class = 250;
    // cifar10
    std::string path;
    std::string test_path;
    std::size_t max_records = 0;  // 0 = all
};

struct StreamPart {
    std::size_t stc = 500;
    std::size_t clients = 5;
    std::size_t segment = 128;  // buffer capacity N and per-iteration batch
    std::size_t segments_per_round = 0;  // 0 = auto: (dataset/K)/N, min 1
};

struct PolicyPart {
    std::string kind = "is";  // is | rr | fifo | kcenter
    std::size_t lazy_interval = 0;  // 0 = lazy scoring disabled
};

struct ModelPart {
    std::string encoder = "smallconv";  // smallconv | mlp
    std::vector<std::size_t> hidden = {8, 16};
    std::size_t repr_dim = 32;
    std::size_t predictor_hidden = 64;
};

struct TrainPart {
    nd::real lr = 0.06;
    nd::real weight_decay = 0.0001;
    nd::real ema_tau = 0.99;
    std::size_t rounds = 300;
    bool symmetrize = false;
    std::string loss = "byol";  // byol | infonce
    nd::real temperature = 0.5;
    nd::real participation = 1.0;
    bool weighted_agg = false;
};

struct AugmentPart {
    std::size_t crop_pad = 4;
    nd::real flip_p = 0.5;
    nd::real jitter = 0.4;
    nd::real gray_p = 0.1;
    std::string weak = "hflip";  // hflip | crop | grayscale | jitter
};

struct ProbePart {
    nd::real label_fraction = 0.1;
    int epochs = 50;
    nd::real lr = 0.01;
    std::size_t batch = 128;
    std::size_t every_rounds = 0;  // 0 = final round only
};

struct OutputPart {
    std::string dir = "runs/out";
    bool log_buffer = false;
    std::size_t checkpoint_every = 0;  // 0 = final only
};

struct RunConfig {
    DatasetConfig dataset;
    StreamPart stream;
    PolicyPart policy;
    ModelPart model;
    TrainPart train;
    AugmentPart augment;
    ProbePart probe;
    OutputPart output;
    std::uint64_t seed = 42;
    std::size_t jobs = 1;
    std::string kernels = "auto";  // auto | scalar | avx2
};

// Strict construction from JSON: unknown keys, type errors and constraint
// violations throw ConfigError naming the offending key.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig parse_config_file(const std::filesystem::path& path);
void validate(const RunConfig& cfg);

// Dotted-path override, e.g. "train.lr=0.03" (flags beat file values).
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Output root: relative output dirs are resolved against $FCLSIM_OUT_ROOT
// when set.
std::filesystem::path resolve_output_dir(const std::string& dir);

}  // namespace fcl::cli
