#include "fcl/coreset/buffer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "fcl/errors.hpp"
#include "fcl/ndcore/ops.hpp"

namespace fcl::coreset {

namespace {

using nd::real;
using nd::Tensor;

// Selection order of the topN rule: higher score first; ties favor buffer
// residents (higher age), then lower sample id.
bool rank_before(const ScoredEntry& a, const ScoredEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.age != b.age) return a.age > b.age;
    return a.sample->id < b.sample->id;
}

}  // namespace

Policy parse_policy(const std::string& name) {
    if (name == "is" || name == "importance_scoring") return Policy::ImportanceScoring;
    if (name == "rr" || name == "random_replacement") return Policy::RandomReplacement;
    if (name == "fifo") return Policy::Fifo;
    if (name == "kcenter" || name == "k-center") return Policy::KCenter;
    throw ConfigError("coreset: unknown policy '" + name + "'");
}

std::string policy_name(Policy p) {
    switch (p) {
        case Policy::ImportanceScoring: return "is";
        case Policy::RandomReplacement: return "rr";
        case Policy::Fifo: return "fifo";
        case Policy::KCenter: return "kcenter";
    }
    return "?";
}

std::vector<real> importance_scores(const model::SiameseModel& model,
                                    std::span<const data::Sample* const> samples,
                                    augment::WeakAug method) {
    if (samples.empty()) return {};
    const model::EncoderConfig& ec = model.encoder_config();

    std::vector<Tensor> raw, weak;
    raw.reserve(samples.size());
    weak.reserve(samples.size());
    for (const data::Sample* s : samples) {
        raw.push_back(augment::to_tensor(*s, ec.in_channels, ec.in_h, ec.in_w));
        weak.push_back(augment::weak_view(*s, method, ec.in_channels, ec.in_h, ec.in_w));
    }

    nd::Tape tape = nd::Tape::inference();
    Tensor yo = model.forward_online(tape, model::stack_views(raw));
    Tensor yt = model.forward_target(model::stack_views(weak));
    Tensor yo_n = nd::l2_normalize_rows(tape, yo);
    Tensor yt_n = nd::l2_normalize_rows(tape, yt);
    // Same mul + row-sum composition as the BYOL loss, so the score equals
    // exactly half the loss of the (x, weak(x)) pair.
    Tensor cos = nd::row_sum(tape, nd::mul(tape, yo_n, yt_n));

    std::vector<real> out(samples.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = real(1) - cos.at(i);
    return out;
}

real importance_score(const model::SiameseModel& model, const data::Sample& x,
                      augment::WeakAug method) {
    const data::Sample* p = &x;
    return importance_scores(model, std::span<const data::Sample* const>(&p, 1), method)[0];
}

nd::Tensor ModelScorer::embed(std::span<const data::Sample* const> samples) const {
    const model::EncoderConfig& ec = model_->encoder_config();
    std::vector<Tensor> views;
    views.reserve(samples.size());
    for (const data::Sample* s : samples)
        views.push_back(augment::to_tensor(*s, ec.in_channels, ec.in_h, ec.in_w));
    nd::Tape tape = nd::Tape::inference();
    return model_->forward_online_encoder(tape, model::stack_views(views));
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, Policy policy, std::size_t lazy_interval,
                           std::uint64_t rng_seed)
    : capacity_(capacity), policy_(policy), lazy_interval_(lazy_interval), rng_(rng_seed) {
    if (capacity_ == 0) throw ConfigError("coreset: buffer capacity must be positive");
}

std::vector<const data::Sample*> ReplayBuffer::samples() const {
    std::vector<const data::Sample*> out;
    out.reserve(entries_.size());
    for (const ScoredEntry& e : entries_) out.push_back(e.sample);
    return out;
}

real ReplayBuffer::mean_score() const {
    if (entries_.empty()) return 0;
    real s = 0;
    for (const ScoredEntry& e : entries_) s += e.score;
    return s / real(entries_.size());
}

real ReplayBuffer::min_score() const {
    real s = std::numeric_limits<real>::infinity();
    for (const ScoredEntry& e : entries_) s = std::min(s, e.score);
    return entries_.empty() ? 0 : s;
}

real ReplayBuffer::max_score() const {
    real s = -std::numeric_limits<real>::infinity();
    for (const ScoredEntry& e : entries_) s = std::max(s, e.score);
    return entries_.empty() ? 0 : s;
}

std::vector<const data::Sample*> ReplayBuffer::unique_new(
    std::span<const data::Sample* const> batch) const {
    std::unordered_set<std::int64_t> seen;
    for (const ScoredEntry& e : entries_) seen.insert(e.sample->id);
    std::vector<const data::Sample*> fresh;
    fresh.reserve(batch.size());
    for (const data::Sample* s : batch)
        if (seen.insert(s->id).second) fresh.push_back(s);
    return fresh;
}

AdmissionReport ReplayBuffer::finish_report(std::span<const data::Sample* const> batch,
                                            const std::vector<std::int64_t>& evicted,
                                            std::size_t rescored) const {
    AdmissionReport rep;
    rep.evicted_ids = evicted;
    rep.rescored_count = rescored;
    std::unordered_set<std::int64_t> resident;
    for (const ScoredEntry& e : entries_) resident.insert(e.sample->id);
    std::size_t dropped = 0;
    std::unordered_set<std::int64_t> reported;
    for (const data::Sample* s : batch) {
        if (resident.count(s->id)) {
            if (reported.insert(s->id).second) rep.admitted_ids.push_back(s->id);
        } else {
            ++dropped;
        }
    }
    rep.eviction_ratio = batch.empty() ? real(0) : real(dropped) / real(batch.size());
    return rep;
}

AdmissionReport ReplayBuffer::update(std::span<const data::Sample* const> batch,
                                     const Scorer* scorer) {
    switch (policy_) {
        case Policy::ImportanceScoring:
            if (!scorer) throw Error("coreset: importance scoring requires a scorer");
            return update_importance(batch, *scorer);
        case Policy::RandomReplacement:
            return update_random(batch);
        case Policy::Fifo:
            return update_fifo(batch);
        case Policy::KCenter:
            if (!scorer) throw Error("coreset: k-center requires a scorer");
            return update_kcenter(batch, *scorer);
    }
    throw Error("coreset: unknown policy");
}

AdmissionReport ReplayBuffer::update_importance(std::span<const data::Sample* const> batch,
                                                const Scorer& scorer) {
    // Ages advance first so a resident admitted at iteration t is rescored at
    // t+T and not before (age mod T == 0 after the bump).
    for (ScoredEntry& e : entries_) e.age += 1;

    std::vector<std::size_t> due;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const bool rescore =
            lazy_interval_ == 0 ? true : entries_[i].age % long(lazy_interval_) == 0;
        if (rescore) due.push_back(i);
    }
    std::vector<const data::Sample*> fresh = unique_new(batch);

    // One batched scoring pass: due residents first, then arrivals.
    std::vector<const data::Sample*> to_score;
    to_score.reserve(due.size() + fresh.size());
    for (std::size_t i : due) to_score.push_back(entries_[i].sample);
    for (const data::Sample* s : fresh) to_score.push_back(s);
    std::vector<real> scores;
    if (!to_score.empty()) scores = scorer.scores(to_score);

    for (std::size_t j = 0; j < due.size(); ++j) {
        entries_[due[j]].score = scores[j];
        entries_[due[j]].last_scored_age = entries_[due[j]].age;
    }

    std::vector<ScoredEntry> pool = entries_;
    for (std::size_t j = 0; j < fresh.size(); ++j) {
        ScoredEntry e;
        e.sample = fresh[j];
        e.score = scores[due.size() + j];
        e.age = 0;
        e.last_scored_age = 0;
        e.admit_seq = next_admit_seq_ + long(j);
        pool.push_back(e);
    }
    next_admit_seq_ += long(fresh.size());

    std::sort(pool.begin(), pool.end(), rank_before);
    if (pool.size() > capacity_) pool.resize(capacity_);

    std::vector<std::int64_t> evicted;
    {
        std::unordered_set<std::int64_t> kept;
        for (const ScoredEntry& e : pool) kept.insert(e.sample->id);
        for (const ScoredEntry& e : entries_)
            if (!kept.count(e.sample->id)) evicted.push_back(e.sample->id);
    }
    entries_ = std::move(pool);
    return finish_report(batch, evicted, due.size());
}

AdmissionReport ReplayBuffer::update_random(std::span<const data::Sample* const> batch) {
    for (ScoredEntry& e : entries_) e.age += 1;
    std::vector<const data::Sample*> fresh = unique_new(batch);

    std::vector<ScoredEntry> pool = entries_;
    for (const data::Sample* s : fresh) {
        ScoredEntry e;
        e.sample = s;
        e.admit_seq = next_admit_seq_++;
        pool.push_back(e);
    }

    if (pool.size() > capacity_) {
        // Uniform seeded N-subset of buffer ∪ batch (partial Fisher-Yates).
        for (std::size_t i = 0; i < capacity_; ++i) {
            const std::size_t j = i + rng_.index(pool.size() - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(capacity_);
        std::sort(pool.begin(), pool.end(),
                  [](const ScoredEntry& a, const ScoredEntry& b) {
                      return a.admit_seq < b.admit_seq;
                  });
    }

    std::vector<std::int64_t> evicted;
    {
        std::unordered_set<std::int64_t> kept;
        for (const ScoredEntry& e : pool) kept.insert(e.sample->id);
        for (const ScoredEntry& e : entries_)
            if (!kept.count(e.sample->id)) evicted.push_back(e.sample->id);
    }
    entries_ = std::move(pool);
    return finish_report(batch, evicted, 0);
}

AdmissionReport ReplayBuffer::update_fifo(std::span<const data::Sample* const> batch) {
    for (ScoredEntry& e : entries_) e.age += 1;
    std::vector<const data::Sample*> fresh = unique_new(batch);

    std::vector<ScoredEntry> pool = entries_;
    for (const data::Sample* s : fresh) {
        ScoredEntry e;
        e.sample = s;
        e.admit_seq = next_admit_seq_++;
        pool.push_back(e);
    }
    // Queue semantics: drop the oldest admissions beyond capacity.
    std::sort(pool.begin(), pool.end(),
              [](const ScoredEntry& a, const ScoredEntry& b) { return a.admit_seq < b.admit_seq; });
    std::vector<std::int64_t> evicted;
    if (pool.size() > capacity_) {
        const std::size_t drop = pool.size() - capacity_;
        for (std::size_t i = 0; i < drop; ++i) evicted.push_back(pool[i].sample->id);
        pool.erase(pool.begin(), pool.begin() + std::ptrdiff_t(drop));
    }
    entries_ = std::move(pool);
    return finish_report(batch, evicted, 0);
}

AdmissionReport ReplayBuffer::update_kcenter(std::span<const data::Sample* const> batch,
                                             const Scorer& scorer) {
    for (ScoredEntry& e : entries_) e.age += 1;
    std::vector<const data::Sample*> fresh = unique_new(batch);

    std::vector<ScoredEntry> pool = entries_;
    for (const data::Sample* s : fresh) {
        ScoredEntry e;
        e.sample = s;
        e.admit_seq = next_admit_seq_++;
        pool.push_back(e);
    }

    if (pool.size() > capacity_) {
        // Greedy farthest-first traversal in feature space, seeded at the
        // point closest to the centroid.
        std::vector<const data::Sample*> union_samples;
        union_samples.reserve(pool.size());
        for (const ScoredEntry& e : pool) union_samples.push_back(e.sample);
        Tensor emb = scorer.embed(union_samples);
        const std::size_t m = pool.size(), d = emb.dim(1);

        std::vector<real> centroid(d, 0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < d; ++j) centroid[j] += emb.at2(i, j);
        for (real& v : centroid) v /= real(m);

        auto dist2_to = [&](std::size_t i, const real* q) {
            real s = 0;
            for (std::size_t j = 0; j < d; ++j) {
                const real diff = emb.at2(i, j) - q[j];
                s += diff * diff;
            }
            return s;
        };

        std::size_t seed_idx = 0;
        real best = std::numeric_limits<real>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            const real ds = dist2_to(i, centroid.data());
            if (ds < best) {
                best = ds;
                seed_idx = i;
            }
        }

        std::vector<bool> selected(m, false);
        std::vector<real> min_dist(m, std::numeric_limits<real>::infinity());
        std::vector<std::size_t> chosen;
        auto add_point = [&](std::size_t idx) {
            selected[idx] = true;
            chosen.push_back(idx);
            for (std::size_t i = 0; i < m; ++i) {
                if (selected[i]) continue;
                min_dist[i] = std::min(min_dist[i], dist2_to(i, emb.data() + idx * d));
            }
        };
        add_point(seed_idx);
        while (chosen.size() < capacity_) {
            std::size_t far = m;
            real far_d = -1;
            for (std::size_t i = 0; i < m; ++i) {
                if (selected[i]) continue;
                if (min_dist[i] > far_d) {
                    far_d = min_dist[i];
                    far = i;
                }
            }
            add_point(far);
        }
        std::sort(chosen.begin(), chosen.end());
        std::vector<ScoredEntry> next;
        next.reserve(capacity_);
        for (std::size_t idx : chosen) next.push_back(pool[idx]);
        pool = std::move(next);
    }

    std::vector<std::int64_t> evicted;
    {
        std::unordered_set<std::int64_t> kept;
        for (const ScoredEntry& e : pool) kept.insert(e.sample->id);
        for (const ScoredEntry& e : entries_)
            if (!kept.count(e.sample->id)) evicted.push_back(e.sample->id);
    }
    entries_ = std::move(pool);
    return finish_report(batch, evicted, 0);
}

}  // namespace fcl::coreset
