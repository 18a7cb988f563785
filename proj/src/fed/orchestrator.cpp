#include "fcl/fed/orchestrator.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "fcl/errors.hpp"
#include "fcl/ndcore/rng.hpp"

namespace fcl::fed {

namespace {
using nd::real;
using nd::Tensor;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}
}  // namespace

LocalTrainResult local_train(ClientState& client, const GlobalModel& global,
                             const data::Dataset& ds, std::size_t segments, const FedConfig& cfg,
                             int round) {
    LocalTrainResult res;
    const auto t_start = Clock::now();
    client.model.load_online(global.params);

    double batch_seconds = 0;
    for (std::size_t i = 0; i < segments; ++i) {
        const long iter = long(round - 1) * long(segments) + long(i);
        try {
            auto segment = data::next_segment(client.stream, ds, cfg.stream.segment);
            const auto t_batch = Clock::now();
            const coreset::ModelScorer scorer(client.model, cfg.weak);
            coreset::AdmissionReport rep = client.buffer.update(segment, &scorer);
            const auto buf = client.buffer.samples();
            const real loss = model::train_step(client.model, buf, cfg.pipeline, client.rng,
                                                cfg.train);
            batch_seconds += seconds_since(t_batch);

            eval::IterRow row;
            row.client = client.id;
            row.round = round;
            row.iteration = iter;
            row.loss = loss;
            row.eviction_ratio = rep.eviction_ratio;
            row.rescored_count = long(rep.rescored_count);
            row.buffer_mean_score = client.buffer.mean_score();
            row.buffer_min_score = client.buffer.min_score();
            row.buffer_max_score = client.buffer.max_score();
            res.iter_rows.push_back(row);

            if (cfg.log_buffer)
                for (const coreset::ScoredEntry& e : client.buffer.entries())
                    res.buffer_rows.push_back({client.id, round, iter, e.sample->id, e.score,
                                               e.age});
        } catch (const Error& e) {
            throw Error("client " + std::to_string(client.id) + " iteration " +
                        std::to_string(iter) + ": " + e.what());
        }
    }

    for (const auto& [name, t] : client.model.named_online_params())
        res.params.emplace_back(name, t.clone());
    res.seconds = seconds_since(t_start);
    res.batch_seconds_mean = segments == 0 ? 0 : batch_seconds / double(segments);
    return res;
}

std::vector<std::pair<std::string, Tensor>> aggregate(
    const std::vector<std::vector<std::pair<std::string, Tensor>>>& client_params,
    const std::vector<real>& weights) {
    if (client_params.empty()) throw Error("aggregate: no client parameters");
    const std::size_t k = client_params.size();
    const auto& first = client_params.front();

    for (const auto& cp : client_params) {
        if (cp.size() != first.size()) throw DimensionError("aggregate: tensor count mismatch");
        for (std::size_t i = 0; i < cp.size(); ++i) {
            if (cp[i].first != first[i].first)
                throw DimensionError("aggregate: name mismatch '" + cp[i].first + "' vs '" +
                                     first[i].first + "'");
            if (cp[i].second.shape() != first[i].second.shape())
                throw DimensionError("aggregate: shape mismatch for '" + cp[i].first + "'");
        }
    }
    if (!weights.empty()) {
        if (weights.size() != k) throw Error("aggregate: weight count mismatch");
        real sum = 0;
        for (real w : weights) {
            if (w < real(0)) throw Error("aggregate: negative weight");
            sum += w;
        }
        if (std::abs(double(sum) - 1.0) > 1e-9)
            throw Error("aggregate: weights sum to " + std::to_string(double(sum)) + ", not 1");
    }

    // Mean of identical replicas is the replica; return an exact copy instead
    // of accumulating rounding.
    bool all_same = true;
    for (std::size_t c = 1; c < k && all_same; ++c)
        for (std::size_t i = 0; i < first.size() && all_same; ++i) {
            const auto& a = first[i].second;
            const auto& b = client_params[c][i].second;
            for (std::size_t j = 0; j < a.size(); ++j)
                if (a.data()[j] != b.data()[j]) {
                    all_same = false;
                    break;
                }
        }
    if (all_same && weights.empty()) {
        std::vector<std::pair<std::string, Tensor>> out;
        for (const auto& [name, t] : first) out.emplace_back(name, t.clone());
        return out;
    }

    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(first.size());
    for (std::size_t i = 0; i < first.size(); ++i)
        out.emplace_back(first[i].first, Tensor::zeros(first[i].second.shape()));

    const auto& K = nd::kern::active();
    for (std::size_t c = 0; c < k; ++c) {
        const real w = weights.empty() ? real(1) / real(k) : weights[c];
        for (std::size_t i = 0; i < first.size(); ++i)
            K.axpy(w, client_params[c][i].second.data(), out[i].second.data(),
                   out[i].second.size());
    }
    return out;
}

Orchestrator::Orchestrator(const FedConfig& cfg, const data::Dataset& train)
    : cfg_(cfg), ds_(train) {
    if (cfg_.jobs == 0) throw ConfigError("fed: jobs must be >= 1");
    if (!(cfg_.participation > 0) || cfg_.participation > 1)
        throw ConfigError("fed: participation must be in (0,1]");

    data::StreamConfig scfg = cfg_.stream;
    scfg.seed = nd::split_seed(cfg_.master_seed, "stream");
    std::vector<data::ClientStream> streams = data::make_stc_stream(ds_, scfg);

    const std::uint64_t init_seed = nd::split_seed(cfg_.master_seed, "init");
    const std::size_t total = ds_.samples.size();
    clients_.reserve(streams.size());
    for (std::size_t k = 0; k < streams.size(); ++k) {
        shard_weights_.push_back(total == 0 ? real(0)
                                            : real(streams[k].order.size()) / real(total));
        // Every client starts from the same seeded draw, so the round-1
        // broadcast finds all replicas already identical (including targets).
        model::SiameseModel m(cfg_.encoder, cfg_.predictor_hidden, init_seed);
        coreset::ReplayBuffer buf(cfg_.stream.segment, cfg_.policy, cfg_.lazy_interval,
                                  nd::split_seed(cfg_.master_seed, "buffer-" + std::to_string(k)));
        clients_.emplace_back(int(k), std::move(m), std::move(buf), std::move(streams[k]),
                              nd::split_seed(cfg_.master_seed, "client-" + std::to_string(k)));
    }
}

GlobalModel Orchestrator::initial_global() const {
    model::SiameseModel m(cfg_.encoder, cfg_.predictor_hidden,
                          nd::split_seed(cfg_.master_seed, "init"));
    GlobalModel g;
    g.round = 0;
    for (const auto& [name, t] : m.named_online_params()) g.params.emplace_back(name, t.clone());
    return g;
}

GlobalModel Orchestrator::run(eval::MetricsArchive& archive, const RoundCallback& on_round) {
    return run_from(initial_global(), archive, on_round);
}

GlobalModel Orchestrator::run_from(GlobalModel global, eval::MetricsArchive& archive,
                                   const RoundCallback& on_round) {
    nd::Rng participation_rng(nd::split_seed(cfg_.master_seed, "participation"));
    const std::size_t k = clients_.size();

    for (std::size_t r = std::size_t(global.round) + 1; r <= cfg_.rounds; ++r) {
        const auto t_round = Clock::now();

        // Participant selection (full participation by default).
        std::vector<std::size_t> participants(k);
        std::iota(participants.begin(), participants.end(), std::size_t(0));
        const std::size_t take =
            std::max<std::size_t>(1, std::size_t(std::ceil(double(cfg_.participation) * double(k))));
        if (take < k) {
            participation_rng.shuffle(participants);
            participants.resize(take);
            std::sort(participants.begin(), participants.end());
        }

        std::vector<LocalTrainResult> results(participants.size());
        std::vector<std::exception_ptr> errors(participants.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            while (true) {
                const std::size_t slot = next.fetch_add(1);
                if (slot >= participants.size()) break;
                try {
                    results[slot] =
                        local_train(clients_[participants[slot]], global, ds_,
                                    cfg_.stream.segments_per_round, cfg_, int(r));
                } catch (...) {
                    errors[slot] = std::current_exception();
                }
            }
        };
        const std::size_t nthreads = std::min(cfg_.jobs, participants.size());
        if (nthreads <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            pool.reserve(nthreads);
            for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        for (std::size_t s = 0; s < participants.size(); ++s)
            if (errors[s]) std::rethrow_exception(errors[s]);

        // Merge metrics in client order, never completion order.
        real loss_sum = 0;
        std::size_t loss_count = 0;
        double batch_mean = 0;
        for (std::size_t s = 0; s < participants.size(); ++s) {
            for (const eval::IterRow& row : results[s].iter_rows) {
                archive.add_iter(row);
                loss_sum += row.loss;
                ++loss_count;
            }
            for (const eval::BufferRow& row : results[s].buffer_rows) archive.add_buffer(row);
            batch_mean += results[s].batch_seconds_mean;
        }
        batch_mean /= double(participants.size());

        std::vector<std::vector<std::pair<std::string, Tensor>>> uploads;
        uploads.reserve(participants.size());
        for (auto& res : results) uploads.push_back(std::move(res.params));

        std::vector<real> weights;
        if (cfg_.weighted_agg) {
            real total = 0;
            for (std::size_t idx : participants) total += shard_weights_[idx];
            for (std::size_t idx : participants) weights.push_back(shard_weights_[idx] / total);
        }
        global.params = aggregate(uploads, weights);
        global.round = int(r);

        eval::RoundRow row;
        row.round = int(r);
        row.mean_loss = loss_count == 0 ? real(0) : loss_sum / real(loss_count);
        row.wall_clock_s = seconds_since(t_round);
        row.mean_batch_s = batch_mean;
        if (on_round) row.probe_accuracy = on_round(int(r), global);
        archive.add_round(row);
    }
    return global;
}

}  // namespace fcl::fed
