#pragma once

#include "cortex/config.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cortex {

// Where a cache entry came from. Context entries are the visible token
// stream and obey causal masking by position; injected entries are
// reference material attendable by every later query.
enum class Origin : uint8_t { context, injected };

struct LayerWeights {
    std::vector<float> attn_norm; // d_model
    std::vector<float> wq, wk, wv, wo; // d_model x d_model, row-major
    std::vector<float> mlp_norm; // d_model
    std::vector<float> w_in;  // d_ff x d_model
    std::vector<float> w_out; // d_model x d_ff
};

// The singleton W: every parameter of the toy transformer, immutable after
// construction. total_bytes() is the analytic parameter count times the
// fp32 element width, never an allocator measurement.
class WeightStore {
public:
    // Deterministic seeded init. Scheme: token embedding N(0,1); every
    // projection matrix N(0, 1/sqrt(fan_in)); norm gains N(1, 0.02);
    // unembedding N(0, 1/sqrt(d_model)). Draw order is embedding, then per
    // layer {attn_norm, wq, wk, wv, wo, mlp_norm, w_in, w_out}, then
    // final_norm, then unembedding.
    static WeightStore init(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    const LayerWeights& layer(int l) const { return layers_[static_cast<size_t>(l)]; }
    std::span<const float> embedding_row(int token) const;
    const std::vector<float>& final_norm() const { return final_norm_; }
    const std::vector<float>& unembedding() const { return unembedding_; }

    int64_t parameter_count() const { return parameter_count_; }
    int64_t total_bytes() const { return parameter_count_ * 4; }

private:
    WeightStore() = default;

    ModelConfig cfg_;
    std::vector<float> embedding_; // vocab x d_model
    std::vector<LayerWeights> layers_;
    std::vector<float> final_norm_;
    std::vector<float> unembedding_; // vocab x d_model
    int64_t parameter_count_ = 0;
};

// Per-agent KV store: for each layer, an append-only series of (key, value)
// rows plus one shared position/origin column (every layer always holds the
// same entries). The final-layer keys double as the point cloud the synapse
// samples from.
//
// Appends go through begin_entry / write_layer(0..n_layers-1) / end_entry;
// forward_step drives that protocol so attention at layer l can already see
// the entry being written. Operations that require a settled cache throw
// sequencing_error while an entry is open.
class KvCache {
public:
    explicit KvCache(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    int64_t size() const { return static_cast<int64_t>(positions_.size()); }
    int64_t position(int64_t i) const { return positions_[static_cast<size_t>(i)]; }
    Origin origin(int64_t i) const { return origins_[static_cast<size_t>(i)]; }
    int64_t last_context_position() const { return last_context_position_; }
    int64_t context_count() const { return context_count_; }

    std::span<const float> key(int layer, int64_t i) const;
    std::span<const float> value(int layer, int64_t i) const;
    std::span<const float> layer_keys(int layer) const;
    std::span<const float> layer_values(int layer) const;

    // Analytic K/V payload bytes: entries * n_layers * 2 * d_model * 4.
    int64_t kv_bytes() const;
    static int64_t entry_bytes(const ModelConfig& cfg);

    bool entry_open() const { return entry_open_; }

    void begin_entry(int64_t position, Origin origin);
    void write_layer(int layer, std::span<const float> key,
                     std::span<const float> value);
    void end_entry();

    // Whole-entry append for snapshot materialization and injection.
    // keys/values hold n_layers rows of d_model floats.
    void append_entry(int64_t position, Origin origin,
                      std::span<const float> keys, std::span<const float> values);

private:
    struct LayerKv {
        std::vector<float> keys;   // size() * d_model
        std::vector<float> values; // size() * d_model
    };

    ModelConfig cfg_;
    std::vector<int64_t> positions_;
    std::vector<Origin> origins_;
    std::vector<LayerKv> layers_;
    int64_t last_context_position_ = -1;
    int64_t context_count_ = 0;
    bool entry_open_ = false;
    int layers_written_ = 0;
};

struct StepResult {
    std::vector<float> logits;      // vocab_size
    std::vector<float> hidden_last; // d_model, after the final norm
    std::vector<float> final_query; // d_model, final-layer post-RoPE query
};

// One incremental decode step: appends exactly one entry per layer and
// returns next-token logits plus this token's final hidden state. Context
// positions must be strictly increasing; injected entries already present
// are attendable regardless of their (virtual) position.
StepResult forward_step(const WeightStore& w, KvCache& cache, int token,
                        int64_t position);

// Greedy decode from scratch: feeds the prompt, then emits n_new argmax
// tokens. Returns prompt + generated ids.
std::vector<int> generate_greedy(const WeightStore& w, std::span<const int> prompt,
                                 int n_new);

// Byte-level tokenizer: one token per byte, ids 0..255.
std::vector<int> tokenize_bytes(std::string_view text);
std::string detokenize_bytes(std::span<const int> tokens);

} // namespace cortex
