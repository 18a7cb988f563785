#pragma once

#include <string>
#include <vector>

#include "fcl/cli/config.hpp"
#include "fcl/data/dataset.hpp"
#include "fcl/eval/metrics.hpp"
#include "fcl/fed/orchestrator.hpp"

namespace fcl::cli {

// Exit codes shared by the CLI verbs.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitInput = 2;

// Assembled runtime pieces derived from a RunConfig.
struct RunPlan {
    RunConfig cfg;
    data::Dataset train;
    data::Dataset test;
    fed::FedConfig fed;
};

// Builds datasets and the fed configuration (resolving the auto
// segments_per_round rule); validates inputs without touching the output dir.
RunPlan prepare_run(const RunConfig& cfg);

struct RunResult {
    fed::GlobalModel global;
    nd::real final_probe_accuracy = -1;
    eval::MetricsArchive archive;
};

// Executes the federated run (no file output).
RunResult execute_run(RunPlan& plan);

// Full `run` verb: execute + write metrics CSVs, checkpoints and manifest
// into the output dir. `resume_from` optionally names a checkpoint.
int cmd_run(const RunConfig& cfg, const std::string& resume_from = "", bool quiet = false);

struct CompareEntry {
    std::string name;
    RunConfig cfg;
};

// Runs each (config, seed), collects probe accuracies, writes compare.csv
// and prints the per-config medians plus an ordering verdict.
int cmd_compare(const std::vector<CompareEntry>& entries, const std::vector<std::uint64_t>& seeds,
                const std::string& out_dir);

// Re-evaluates a checkpoint with the linear probe.
int cmd_probe(const RunConfig& cfg, const std::string& checkpoint_path);

// Dumps the manifest of a finished run directory.
int cmd_inspect(const std::string& run_dir);

nd::real median(std::vector<nd::real> v);

}  // namespace fcl::cli
