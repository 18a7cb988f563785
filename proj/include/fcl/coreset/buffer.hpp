#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fcl/augment/augment.hpp"
#include "fcl/data/dataset.hpp"
#include "fcl/model/siamese.hpp"
#include "fcl/ndcore/rng.hpp"

namespace fcl::coreset {

// Buffer resident with its score and age bookkeeping. Ages count buffer
// update calls (one call per arriving segment = one iteration).
struct ScoredEntry {
    const data::Sample* sample = nullptr;
    nd::real score = 0;  // in [0,2] under importance scoring; 0 for unscored policies
    long age = 0;
    long last_scored_age = 0;
    long admit_seq = 0;  // admission order, drives FIFO
};

struct AdmissionReport {
    std::vector<std::int64_t> admitted_ids;
    std::vector<std::int64_t> evicted_ids;
    // Fraction of the arriving batch (by slot) that did not end up resident.
    nd::real eviction_ratio = 0;
    // Resident rescores performed in this call (fresh arrival scores excluded).
    std::size_t rescored_count = 0;
};

enum class Policy { ImportanceScoring, RandomReplacement, Fifo, KCenter };

Policy parse_policy(const std::string& name);
std::string policy_name(Policy p);

// 1 - cos( g_o(f_o(x)), f_t(weak(x)) ): positive, in [0,2], equal to half the
// BYOL loss of the pair (x, weak(x)). No gradients recorded; deterministic
// given (model parameters, x, method).
nd::real importance_score(const model::SiameseModel& model, const data::Sample& x,
                          augment::WeakAug method);

// Batched variant (one forward per network for the whole list); entry i is
// bitwise identical to importance_score on samples[i].
std::vector<nd::real> importance_scores(const model::SiameseModel& model,
                                        std::span<const data::Sample* const> samples,
                                        augment::WeakAug method);

// What a selection policy may ask of the learner: importance scores for the
// scoring policy, feature embeddings for k-center.
class Scorer {
  public:
    virtual ~Scorer() = default;
    virtual std::vector<nd::real> scores(std::span<const data::Sample* const> samples) const = 0;
    virtual nd::Tensor embed(std::span<const data::Sample* const> samples) const = 0;
};

class ModelScorer : public Scorer {
  public:
    ModelScorer(const model::SiameseModel& m, augment::WeakAug weak) : model_(&m), weak_(weak) {}
    std::vector<nd::real> scores(std::span<const data::Sample* const> samples) const override {
        return importance_scores(*model_, samples, weak_);
    }
    // Online encoder only, no predictor.
    nd::Tensor embed(std::span<const data::Sample* const> samples) const override;

  private:
    const model::SiameseModel* model_;
    augment::WeakAug weak_;
};

// Fixed-capacity per-client replay buffer with pluggable selection policy.
class ReplayBuffer {
  public:
    ReplayBuffer(std::size_t capacity, Policy policy, std::size_t lazy_interval,
                 std::uint64_t rng_seed);

    // One buffer update for an arriving segment. `scorer` is required by the
    // importance-scoring and k-center policies. Arrivals whose sample id is
    // already resident are treated as the resident (set union semantics).
    AdmissionReport update(std::span<const data::Sample* const> batch, const Scorer* scorer);

    const std::vector<ScoredEntry>& entries() const { return entries_; }
    std::vector<const data::Sample*> samples() const;
    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    Policy policy() const { return policy_; }
    std::size_t lazy_interval() const { return lazy_interval_; }

    nd::real mean_score() const;
    nd::real min_score() const;
    nd::real max_score() const;

  private:
    AdmissionReport update_importance(std::span<const data::Sample* const> batch,
                                      const Scorer& scorer);
    AdmissionReport update_random(std::span<const data::Sample* const> batch);
    AdmissionReport update_fifo(std::span<const data::Sample* const> batch);
    AdmissionReport update_kcenter(std::span<const data::Sample* const> batch,
                                   const Scorer& scorer);

    // Deduplicates the arriving batch against residents and within itself.
    std::vector<const data::Sample*> unique_new(std::span<const data::Sample* const> batch) const;
    AdmissionReport finish_report(std::span<const data::Sample* const> batch,
                                  const std::vector<std::int64_t>& evicted,
                                  std::size_t rescored) const;

    std::size_t capacity_;
    Policy policy_;
    std::size_t lazy_interval_;  // 0 = lazy scoring disabled
    nd::Rng rng_;
    long next_admit_seq_ = 0;
    std::vector<ScoredEntry> entries_;
};

}  // namespace fcl::coreset
