#pragma once

#include <cstdint>

namespace cortex {

// Decoder-only toy transformer dimensions. The default fits thousands of
// forward steps per second on one laptop core.
struct ModelConfig {
    int n_layers = 4;
    int n_heads = 4;
    int d_model = 64;
    int d_k = 16; // per-head key width, d_model / n_heads
    int vocab_size = 256;
    int64_t max_positions = 8192;
    double rope_base = 10000.0;
    uint64_t seed = 42;

    int d_ff() const { return 4 * d_model; }

    // Throws config_error when the dimensions are inconsistent.
    void validate() const;
};

// Runtime knobs for the river/stream scheduler and the synapse sampler.
struct RuntimeConfig {
    int k = 64;                  // landmark count
    double lambda = 0.5;         // hybrid coverage/attention mixing weight
    double theta = 0.5;          // gate threshold
    int max_stream_agents = 8;   // live side-agent cap
    int thought_budget = 16;     // max tokens a side agent generates
    int synapse_push_period = 8; // push a snapshot every p river tokens
    int river_budget = 64;       // tokens the river generates after the prompt
    bool single_lane = false;    // run side agents at token boundaries (deterministic)

    // First position index reserved for injected entries. Negative means
    // "top 1024 positions of max_positions".
    int64_t reserved_virtual_base = -1;

    int64_t virtual_base(const ModelConfig& mc) const {
        return reserved_virtual_base >= 0 ? reserved_virtual_base
                                          : mc.max_positions - 1024;
    }

    void validate(const ModelConfig& mc) const;
};

} // namespace cortex
