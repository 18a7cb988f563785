#pragma once

#include <cstdint>
#include <vector>

#include "fcl/data/dataset.hpp"

namespace fcl::data {

// Stream construction knobs. stc is the number of consecutive stream samples
// drawn from one class; segment is the per-iteration batch size N (equal to
// the buffer capacity by default); segments_per_round is the local data
// velocity v in segments.
struct StreamConfig {
    std::size_t stc = 500;
    std::size_t clients = 5;
    std::size_t segment = 128;
    std::size_t segments_per_round = 1;
    std::uint64_t seed = 0;
};

// Converts the paper-style per-round sample count into segments (>= 1).
std::size_t segments_from_samples(std::size_t samples_per_round, std::size_t segment);

// Ordered shard of sample indices owned by one client. The cursor wraps
// cyclically; the shard is never reshuffled between cycles so the temporal
// correlation survives re-traversal.
struct ClientStream {
    std::vector<std::size_t> order;  // indices into Dataset::samples
    std::size_t cursor = 0;
};

// Builds the temporally correlated global ordering (blocks of `stc`
// consecutive samples from a single class, each block's class drawn seeded
// uniformly among classes with samples remaining), cuts it into contiguous
// near-equal shards, and permutes shard-to-client assignment by seed.
// Throws MissingLabelError if any sample lacks a label.
std::vector<ClientStream> make_stc_stream(const Dataset& ds, const StreamConfig& cfg);

// Next `n` samples in order, advancing and wrapping the cursor.
std::vector<const Sample*> next_segment(ClientStream& stream, const Dataset& ds, std::size_t n);

}  // namespace fcl::data
