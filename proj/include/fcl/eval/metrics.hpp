#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fcl/ndcore/kernels.hpp"

namespace fcl::eval {

// One buffer-update + train-step iteration on one client. `iteration` is the
// client-global index (0-based across rounds): (round-1)*v + i.
struct IterRow {
    int client = 0;
    int round = 0;
    long iteration = 0;
    nd::real loss = 0;
    nd::real eviction_ratio = 0;
    long rescored_count = 0;
    nd::real buffer_mean_score = 0;
    nd::real buffer_min_score = 0;
    nd::real buffer_max_score = 0;
};

// Per-round summary. Wall-clock lives here (rounds.csv), never in
// metrics.csv, so repeated runs stay byte-identical there.
struct RoundRow {
    int round = 0;
    nd::real mean_loss = 0;
    nd::real probe_accuracy = -1;  // -1 when not evaluated this round
    double wall_clock_s = 0;
    double mean_batch_s = 0;
};

// Optional per-resident detail used by score trends (output.log_buffer).
struct BufferRow {
    int client = 0;
    int round = 0;
    long iteration = 0;
    std::int64_t sample_id = 0;
    nd::real score = 0;
    long age = 0;
};

struct ProbeRow {
    nd::real label_fraction = 0;
    nd::real accuracy = 0;
    int round = 0;
};

class MetricsArchive {
  public:
    void add_iter(IterRow row) { iters_.push_back(row); }
    void add_round(RoundRow row) { rounds_.push_back(row); }
    void add_buffer(BufferRow row) { buffers_.push_back(row); }
    void add_probe(ProbeRow row) { probes_.push_back(row); }

    const std::vector<IterRow>& iters() const { return iters_; }
    const std::vector<RoundRow>& rounds() const { return rounds_; }
    const std::vector<BufferRow>& buffers() const { return buffers_; }
    const std::vector<ProbeRow>& probes() const { return probes_; }

    // Writes metrics.csv, rounds.csv, probe.csv and (when buffer rows exist)
    // buffer.csv into dir. Floats carry 9 significant digits.
    void write_csv(const std::filesystem::path& dir) const;

  private:
    std::vector<IterRow> iters_;
    std::vector<RoundRow> rounds_;
    std::vector<BufferRow> buffers_;
    std::vector<ProbeRow> probes_;
};

// Centered moving average with reflected edges (constant series stay
// constant; an interior impulse keeps its mass). Throws when window is 0 or
// exceeds the series length.
std::vector<nd::real> moving_average(const std::vector<nd::real>& series, std::size_t window);

struct EvictionTrace {
    std::vector<std::vector<nd::real>> per_client;  // smoothed, indexed by client id
    std::vector<nd::real> pooled;                   // client-mean per iteration, smoothed
};

EvictionTrace eviction_trace(const MetricsArchive& archive, std::size_t window);

// Score series over [iter_begin, iter_end) for samples of one client that
// stayed resident through the whole window, plus the buffer min/max/mean
// envelope. An empty `ids` filter selects every fully resident sample.
struct ScoreTrend {
    std::vector<std::int64_t> ids;
    std::vector<std::vector<nd::real>> series;  // parallel to ids
    std::vector<nd::real> env_min, env_max, env_mean;
};

ScoreTrend score_trend(const MetricsArchive& archive, int client,
                       const std::vector<std::int64_t>& ids, long iter_begin, long iter_end);

// "%.9g" formatting used by every CSV writer.
std::string format_real(double v);

}  // namespace fcl::eval
