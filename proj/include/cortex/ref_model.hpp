#pragma once

#include "cortex/model.hpp"

#include <span>
#include <vector>

namespace cortex::ref {

// Serial full-recompute forward pass, written independently of the
// incremental path and kept for testing and benchmarking. Everything runs
// in double precision with no cache reuse and no parallel regions.

struct SeqItem {
    int token = 0;
    int64_t position = 0;
    Origin origin = Origin::context;
    // Attention scope. Segment 0 is the main stream; injected thoughts
    // carry their own segment so their encode pass sees only themselves,
    // while segment-0 queries may attend any earlier injected entry.
    int segment = 0;
};

struct SeqResult {
    // One row per input item.
    std::vector<std::vector<double>> logits;
    std::vector<std::vector<double>> hidden;      // post final norm
    std::vector<std::vector<double>> final_query; // final layer, post RoPE
};

SeqResult forward_sequence(const WeightStore& w, std::span<const SeqItem> items);

} // namespace cortex::ref
