#include "cortex/injector.hpp"

#include "cortex/errors.hpp"

#include <sstream>

namespace cortex {

std::span<const float> KvBlock::key(int layer, int64_t t) const {
    const size_t d = static_cast<size_t>(d_model);
    return std::span<const float>(
        keys.data() + (static_cast<size_t>(layer) * static_cast<size_t>(token_count) +
                       static_cast<size_t>(t)) * d,
        d);
}

std::span<const float> KvBlock::value(int layer, int64_t t) const {
    const size_t d = static_cast<size_t>(d_model);
    return std::span<const float>(
        values.data() + (static_cast<size_t>(layer) * static_cast<size_t>(token_count) +
                         static_cast<size_t>(t)) * d,
        d);
}

std::string InjectionRecord::csv_header() {
    return "thought_id,token_count,virtual_position_base,applied_at_stream_position";
}

std::string InjectionRecord::csv_row() const {
    std::ostringstream os;
    os << thought_id << ',' << token_count << ',' << virtual_position_base << ','
       << applied_at_stream_position;
    return os.str();
}

KvBlock encode_thought(const WeightStore& w, std::span<const int> thought_tokens,
                       int64_t virtual_position_base) {
    if (thought_tokens.empty())
        throw precondition_error("encode_thought: empty thought");
    const ModelConfig& cfg = w.config();
    if (virtual_position_base < 0 ||
        virtual_position_base + static_cast<int64_t>(thought_tokens.size()) >
            cfg.max_positions)
        throw capacity_error("encode_thought: virtual positions beyond max_positions");

    KvCache scratch(cfg);
    StepResult last;
    int64_t pos = virtual_position_base;
    for (int t : thought_tokens) last = forward_step(w, scratch, t, pos++);

    KvBlock block;
    block.base_position = virtual_position_base;
    block.token_count = static_cast<int64_t>(thought_tokens.size());
    block.n_layers = cfg.n_layers;
    block.d_model = cfg.d_model;
    const size_t d = static_cast<size_t>(cfg.d_model);
    block.keys.reserve(static_cast<size_t>(cfg.n_layers) *
                       static_cast<size_t>(block.token_count) * d);
    block.values.reserve(block.keys.capacity());
    for (int l = 0; l < cfg.n_layers; ++l) {
        auto lk = scratch.layer_keys(l);
        auto lv = scratch.layer_values(l);
        block.keys.insert(block.keys.end(), lk.begin(), lk.end());
        block.values.insert(block.values.end(), lv.begin(), lv.end());
    }
    block.last_hidden = last.hidden_last;
    return block;
}

InjectionRecord inject(KvCache& river_cache, const KvBlock& block,
                       int64_t thought_id, int64_t stream_position) {
    if (block.token_count < 1)
        throw precondition_error("inject: empty block");
    if (river_cache.entry_open())
        throw sequencing_error("inject: river cache has a step in flight");
    if (block.n_layers != river_cache.config().n_layers ||
        block.d_model != river_cache.config().d_model)
        throw precondition_error("inject: block shape mismatch");

    for (int64_t t = 0; t < block.token_count; ++t) {
        river_cache.begin_entry(block.base_position + t, Origin::injected);
        for (int l = 0; l < block.n_layers; ++l) {
            river_cache.write_layer(l, block.key(l, t), block.value(l, t));
        }
        river_cache.end_entry();
    }

    InjectionRecord rec;
    rec.thought_id = thought_id;
    rec.token_count = block.token_count;
    rec.virtual_position_base = block.base_position;
    rec.applied_at_stream_position = stream_position;
    return rec;
}

VirtualPositionPlanner::VirtualPositionPlanner(int64_t reserved_start,
                                               int64_t max_positions)
    : reserved_start_(reserved_start), max_positions_(max_positions) {
    if (reserved_start < 0 || reserved_start >= max_positions)
        throw config_error("planner: reserved_start out of range");
}

int64_t VirtualPositionPlanner::reserve(int64_t token_count) {
    if (token_count < 1) throw precondition_error("planner: token_count must be >= 1");
    const int64_t base = reserved_start_ + used_;
    if (base + token_count > max_positions_)
        throw capacity_error("planner: reserved virtual range exhausted");
    used_ += token_count;
    return base;
}

} // namespace cortex
