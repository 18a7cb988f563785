#include "fcl/eval/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "fcl/errors.hpp"

namespace fcl::eval {

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void MetricsArchive::write_csv(const std::filesystem::path& dir) const {
    {
        std::ofstream out(dir / "metrics.csv");
        if (!out) throw Error("metrics: cannot write " + (dir / "metrics.csv").string());
        out << "client,round,iteration,loss,eviction_ratio,rescored_count,"
               "buffer_mean_score,buffer_min_score,buffer_max_score\n";
        for (const IterRow& r : iters_)
            out << r.client << ',' << r.round << ',' << r.iteration << ','
                << format_real(double(r.loss)) << ',' << format_real(double(r.eviction_ratio))
                << ',' << r.rescored_count << ',' << format_real(double(r.buffer_mean_score))
                << ',' << format_real(double(r.buffer_min_score)) << ','
                << format_real(double(r.buffer_max_score)) << '\n';
    }
    {
        std::ofstream out(dir / "rounds.csv");
        out << "round,mean_loss,probe_accuracy,wall_clock_s,mean_batch_s\n";
        for (const RoundRow& r : rounds_)
            out << r.round << ',' << format_real(double(r.mean_loss)) << ','
                << format_real(double(r.probe_accuracy)) << ',' << format_real(r.wall_clock_s)
                << ',' << format_real(r.mean_batch_s) << '\n';
    }
    {
        std::ofstream out(dir / "probe.csv");
        out << "label_fraction,accuracy,round\n";
        for (const ProbeRow& r : probes_)
            out << format_real(double(r.label_fraction)) << ',' << format_real(double(r.accuracy))
                << ',' << r.round << '\n';
    }
    if (!buffers_.empty()) {
        std::ofstream out(dir / "buffer.csv");
        out << "client,round,iteration,sample_id,score,age\n";
        for (const BufferRow& r : buffers_)
            out << r.client << ',' << r.round << ',' << r.iteration << ',' << r.sample_id << ','
                << format_real(double(r.score)) << ',' << r.age << '\n';
    }
}

std::vector<nd::real> moving_average(const std::vector<nd::real>& series, std::size_t window) {
    if (window == 0) throw Error("moving_average: window must be positive");
    if (window > series.size())
        throw Error("moving_average: window " + std::to_string(window) +
                    " exceeds series length " + std::to_string(series.size()));
    const std::ptrdiff_t n = std::ptrdiff_t(series.size());
    const std::ptrdiff_t lo = std::ptrdiff_t((window - 1) / 2);
    const std::ptrdiff_t hi = std::ptrdiff_t(window / 2);
    std::vector<nd::real> out(series.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        nd::real acc = 0;
        for (std::ptrdiff_t j = i - lo; j <= i + hi; ++j) {
            std::ptrdiff_t idx = j;
            if (idx < 0) idx = -idx;  // reflect
            if (idx >= n) idx = 2 * n - 2 - idx;
            acc += series[std::size_t(idx)];
        }
        out[std::size_t(i)] = acc / nd::real(window);
    }
    return out;
}

EvictionTrace eviction_trace(const MetricsArchive& archive, std::size_t window) {
    if (archive.iters().empty()) throw Error("eviction_trace: empty archive");
    std::map<int, std::vector<nd::real>> per_client;
    for (const IterRow& r : archive.iters())
        per_client[r.client].push_back(r.eviction_ratio);

    EvictionTrace trace;
    std::size_t min_len = SIZE_MAX;
    int max_client = 0;
    for (const auto& [c, v] : per_client) {
        min_len = std::min(min_len, v.size());
        max_client = std::max(max_client, c);
    }
    trace.per_client.resize(std::size_t(max_client) + 1);
    for (const auto& [c, v] : per_client)
        trace.per_client[std::size_t(c)] = moving_average(v, window);

    std::vector<nd::real> pooled(min_len, 0);
    for (std::size_t i = 0; i < min_len; ++i) {
        nd::real acc = 0;
        for (const auto& [c, v] : per_client) acc += v[i];
        pooled[i] = acc / nd::real(per_client.size());
    }
    trace.pooled = moving_average(pooled, window);
    return trace;
}

ScoreTrend score_trend(const MetricsArchive& archive, int client,
                       const std::vector<std::int64_t>& ids, long iter_begin, long iter_end) {
    const long span = iter_end - iter_begin;
    ScoreTrend trend;
    if (span <= 0) return trend;

    // id -> iteration -> score, restricted to the window.
    std::map<std::int64_t, std::map<long, nd::real>> per_id;
    std::map<long, std::vector<nd::real>> per_iter;
    for (const BufferRow& r : archive.buffers()) {
        if (r.client != client || r.iteration < iter_begin || r.iteration >= iter_end) continue;
        per_id[r.sample_id][r.iteration] = r.score;
        per_iter[r.iteration].push_back(r.score);
    }

    std::set<std::int64_t> filter(ids.begin(), ids.end());
    for (const auto& [id, scores] : per_id) {
        if (!filter.empty() && !filter.count(id)) continue;
        if (long(scores.size()) != span) continue;  // evicted (or late) mid-window
        std::vector<nd::real> series;
        series.reserve(std::size_t(span));
        for (const auto& [it, s] : scores) series.push_back(s);
        trend.ids.push_back(id);
        trend.series.push_back(std::move(series));
    }
    for (long it = iter_begin; it < iter_end; ++it) {
        const auto found = per_iter.find(it);
        if (found == per_iter.end()) continue;
        const auto& v = found->second;
        nd::real mn = v[0], mx = v[0], mean = 0;
        for (nd::real s : v) {
            mn = std::min(mn, s);
            mx = std::max(mx, s);
            mean += s;
        }
        trend.env_min.push_back(mn);
        trend.env_max.push_back(mx);
        trend.env_mean.push_back(mean / nd::real(v.size()));
    }
    return trend;
}

}  // namespace fcl::eval
