#include "fcl/data/stream.hpp"

#include <algorithm>
#include <numeric>

#include "fcl/errors.hpp"
#include "fcl/ndcore/rng.hpp"

namespace fcl::data {

std::size_t segments_from_samples(std::size_t samples_per_round, std::size_t segment) {
    if (segment == 0) throw ConfigError("stream: segment size must be positive");
    return std::max<std::size_t>(1, samples_per_round / segment);
}

std::vector<ClientStream> make_stc_stream(const Dataset& ds, const StreamConfig& cfg) {
    if (cfg.stc < 1 || cfg.clients < 1 || cfg.segment < 1 || cfg.segments_per_round < 1)
        throw ConfigError("stream: stc, clients, segment and segments_per_round must be >= 1");

    // Per-class queues, original order preserved within a class.
    std::vector<std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const Sample& s = ds.samples[i];
        if (!s.label)
            throw MissingLabelError("stream: sample id " + std::to_string(s.id) +
                                    " has no label for STC ordering");
        if (std::size_t(*s.label) >= by_class.size()) by_class.resize(std::size_t(*s.label) + 1);
        by_class[std::size_t(*s.label)].push_back(i);
    }

    nd::Rng rng(cfg.seed);
    std::vector<std::size_t> heads(by_class.size(), 0);
    std::vector<std::size_t> nonempty;
    for (std::size_t c = 0; c < by_class.size(); ++c)
        if (!by_class[c].empty()) nonempty.push_back(c);

    std::vector<std::size_t> order;
    order.reserve(ds.samples.size());
    while (!nonempty.empty()) {
        const std::size_t pick = rng.index(nonempty.size());
        const std::size_t c = nonempty[pick];
        const std::size_t remaining = by_class[c].size() - heads[c];
        const std::size_t take = std::min(cfg.stc, remaining);
        for (std::size_t j = 0; j < take; ++j) order.push_back(by_class[c][heads[c] + j]);
        heads[c] += take;
        if (heads[c] == by_class[c].size()) nonempty.erase(nonempty.begin() + std::ptrdiff_t(pick));
    }

    // Contiguous near-equal shards; the first (n % K) shards take one extra.
    const std::size_t n = order.size();
    const std::size_t k = cfg.clients;
    std::vector<std::vector<std::size_t>> shards(k);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < k; ++s) {
        const std::size_t len = n / k + (s < n % k ? 1 : 0);
        shards[s].assign(order.begin() + std::ptrdiff_t(pos),
                         order.begin() + std::ptrdiff_t(pos + len));
        pos += len;
    }

    std::vector<std::size_t> assign(k);
    std::iota(assign.begin(), assign.end(), std::size_t(0));
    rng.shuffle(assign);

    std::vector<ClientStream> streams(k);
    for (std::size_t c = 0; c < k; ++c) streams[c].order = std::move(shards[assign[c]]);
    return streams;
}

std::vector<const Sample*> next_segment(ClientStream& stream, const Dataset& ds, std::size_t n) {
    if (stream.order.empty()) throw EmptyStreamError("stream: next_segment on an empty shard");
    std::vector<const Sample*> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(&ds.samples[stream.order[stream.cursor]]);
        stream.cursor = (stream.cursor + 1) % stream.order.size();
    }
    return out;
}

}  // namespace fcl::data
