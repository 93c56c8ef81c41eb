#pragma once

#include "cortex/model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cortex {

// Per-layer K/V of an encoded thought, ready to append to a river cache.
struct KvBlock {
    int64_t base_position = 0;
    int64_t token_count = 0;
    int n_layers = 0;
    int d_model = 0;
    // Layout: [layer][token][d_model].
    std::vector<float> keys;
    std::vector<float> values;
    std::vector<float> last_hidden; // final hidden of the last thought token

    std::span<const float> key(int layer, int64_t t) const;
    std::span<const float> value(int layer, int64_t t) const;
};

struct InjectionRecord {
    int64_t thought_id = -1;
    int64_t token_count = 0;
    int64_t virtual_position_base = 0;
    int64_t applied_at_stream_position = 0;

    static std::string csv_header();
    std::string csv_row() const;
};

// Runs a normal forward pass over the thought tokens at positions base,
// base+1, ... on a fresh cache; the thought attends causally to itself only,
// never to the river's context.
KvBlock encode_thought(const WeightStore& w, std::span<const int> thought_tokens,
                       int64_t virtual_position_base);

// Appends the block to the river cache with origin=injected. No visible
// token is produced and existing entries are untouched; callers must be at
// a token boundary (sequencing_error otherwise).
InjectionRecord inject(KvCache& river_cache, const KvBlock& block,
                       int64_t thought_id, int64_t stream_position);

// Hands out virtual position ranges from the reserved top band of the
// position space; bases never collide with real stream positions.
class VirtualPositionPlanner {
public:
    VirtualPositionPlanner(int64_t reserved_start, int64_t max_positions);

    int64_t reserved_start() const { return reserved_start_; }
    // Base for the next injection of `token_count` entries; capacity_error
    // when the reserved band is exhausted.
    int64_t reserve(int64_t token_count);

private:
    int64_t reserved_start_;
    int64_t max_positions_;
    int64_t used_ = 0;
};

} // namespace cortex
