#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fcl/augment/augment.hpp"
#include "fcl/coreset/buffer.hpp"
#include "fcl/data/stream.hpp"
#include "fcl/eval/metrics.hpp"
#include "fcl/model/siamese.hpp"

namespace fcl::fed {

// Server-side parameter snapshot (online encoder + predictor), broadcast at
// every round boundary.
struct GlobalModel {
    std::vector<std::pair<std::string, nd::Tensor>> params;
    int round = 0;
};

struct FedConfig {
    model::EncoderConfig encoder;
    std::size_t predictor_hidden = 64;
    coreset::Policy policy = coreset::Policy::ImportanceScoring;
    std::size_t lazy_interval = 0;
    augment::WeakAug weak = augment::WeakAug::HFlip;
    augment::PipelineConfig pipeline;
    model::TrainStepConfig train;
    data::StreamConfig stream;
    std::size_t rounds = 50;
    nd::real participation = 1.0;
    bool weighted_agg = false;
    std::size_t jobs = 1;
    bool log_buffer = false;
    std::uint64_t master_seed = 42;
};

// Everything one simulated device owns: model replicas, buffer, stream
// cursor, rng. Never shared across threads.
struct ClientState {
    int id = 0;
    model::SiameseModel model;
    coreset::ReplayBuffer buffer;
    data::ClientStream stream;
    nd::Rng rng;

    ClientState(int id_, model::SiameseModel m, coreset::ReplayBuffer b, data::ClientStream s,
                std::uint64_t seed)
        : id(id_), model(std::move(m)), buffer(std::move(b)), stream(std::move(s)), rng(seed) {}
};

struct LocalTrainResult {
    std::vector<std::pair<std::string, nd::Tensor>> params;  // deep snapshot
    std::vector<eval::IterRow> iter_rows;
    std::vector<eval::BufferRow> buffer_rows;
    double seconds = 0;
    double batch_seconds_mean = 0;  // mean wall-clock of update_buffer + train_step
};

// LocalTrain of Algorithm form: overwrite online params from the global
// snapshot, then `segments` iterations of {pull segment, update buffer,
// train on the whole buffer}. Target evolves only via EMA.
LocalTrainResult local_train(ClientState& client, const GlobalModel& global,
                             const data::Dataset& ds, std::size_t segments, const FedConfig& cfg,
                             int round);

// Elementwise weighted mean of named parameter lists. Uniform 1/K when
// weights is empty; weights must otherwise be nonnegative and sum to 1
// within 1e-9. Identical inputs return an exact copy (no rounding).
std::vector<std::pair<std::string, nd::Tensor>> aggregate(
    const std::vector<std::vector<std::pair<std::string, nd::Tensor>>>& client_params,
    const std::vector<nd::real>& weights = {});

// Called after every aggregation with the new global snapshot. Returns the
// probe accuracy to record for the round, or -1 when no probe ran.
using RoundCallback = std::function<nd::real(int round, const GlobalModel& global)>;

class Orchestrator {
  public:
    Orchestrator(const FedConfig& cfg, const data::Dataset& train);

    // R rounds of broadcast -> parallel local train -> aggregate. Results are
    // independent of the jobs count (all randomness is per-client-seeded).
    GlobalModel run(eval::MetricsArchive& archive, const RoundCallback& on_round = nullptr);

    // Resume support: start from an existing snapshot at its round counter.
    GlobalModel run_from(GlobalModel global, eval::MetricsArchive& archive,
                         const RoundCallback& on_round = nullptr);

    const std::vector<ClientState>& clients() const { return clients_; }
    GlobalModel initial_global() const;

  private:
    FedConfig cfg_;
    const data::Dataset& ds_;
    std::vector<ClientState> clients_;
    std::vector<nd::real> shard_weights_;
};

}  // namespace fcl::fed
