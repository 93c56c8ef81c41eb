#include "cortex/model.hpp"

#include "cortex/errors.hpp"
#include "cortex/kernels.hpp"
#include "cortex/rng.hpp"

#include <cassert>
#include <string>

namespace cortex {

void ModelConfig::validate() const {
    if (n_layers < 1 || n_heads < 1 || d_model < 1 || d_k < 1)
        throw config_error("model dimensions must be positive");
    if (n_heads * d_k != d_model)
        throw config_error("d_model must equal n_heads * d_k exactly");
    if (d_k % 2 != 0)
        throw config_error("d_k must be even for pairwise rotation");
    if (vocab_size < 1) throw config_error("vocab_size must be positive");
    if (max_positions < 1) throw config_error("max_positions must be positive");
    if (!(rope_base > 0.0)) throw config_error("rope_base must be positive");
}

void RuntimeConfig::validate(const ModelConfig& mc) const {
    if (k < 1) throw config_error("k must be >= 1");
    if (lambda < 0.0 || lambda > 1.0) throw config_error("lambda must be in [0,1]");
    if (theta < -1.0 || theta > 1.0) throw config_error("theta must be in [-1,1]");
    if (max_stream_agents < 0) throw config_error("max_stream_agents must be >= 0");
    if (thought_budget < 1) throw config_error("thought_budget must be >= 1");
    if (synapse_push_period < 1) throw config_error("synapse_push_period must be >= 1");
    if (river_budget < 0) throw config_error("river_budget must be >= 0");
    const int64_t base = virtual_base(mc);
    if (base < 1 || base >= mc.max_positions)
        throw config_error("reserved virtual base out of range");
}

namespace {

void fill_gaussian(Rng& rng, std::vector<float>& dst, size_t n, double mean,
                   double stddev) {
    dst.resize(n);
    for (size_t i = 0; i < n; ++i) {
        dst[i] = static_cast<float>(rng.next_gaussian(mean, stddev));
    }
}

} // namespace

WeightStore WeightStore::init(const ModelConfig& cfg) {
    cfg.validate();
    WeightStore w;
    w.cfg_ = cfg;
    Rng rng(cfg.seed);

    const size_t d = static_cast<size_t>(cfg.d_model);
    const size_t dff = static_cast<size_t>(cfg.d_ff());
    const size_t vocab = static_cast<size_t>(cfg.vocab_size);
    const double proj_std = 1.0 / std::sqrt(static_cast<double>(d));
    const double mlp_out_std = 1.0 / std::sqrt(static_cast<double>(dff));

    fill_gaussian(rng, w.embedding_, vocab * d, 0.0, 1.0);
    w.layers_.resize(static_cast<size_t>(cfg.n_layers));
    for (auto& lw : w.layers_) {
        fill_gaussian(rng, lw.attn_norm, d, 1.0, 0.02);
        fill_gaussian(rng, lw.wq, d * d, 0.0, proj_std);
        fill_gaussian(rng, lw.wk, d * d, 0.0, proj_std);
        fill_gaussian(rng, lw.wv, d * d, 0.0, proj_std);
        fill_gaussian(rng, lw.wo, d * d, 0.0, proj_std);
        fill_gaussian(rng, lw.mlp_norm, d, 1.0, 0.02);
        fill_gaussian(rng, lw.w_in, dff * d, 0.0, proj_std);
        fill_gaussian(rng, lw.w_out, d * dff, 0.0, mlp_out_std);
    }
    fill_gaussian(rng, w.final_norm_, d, 1.0, 0.02);
    fill_gaussian(rng, w.unembedding_, vocab * d, 0.0, proj_std);

    const int64_t per_layer = static_cast<int64_t>(2 * d + 4 * d * d + dff * d + d * dff);
    w.parameter_count_ = static_cast<int64_t>(2 * vocab * d + d) +
                         static_cast<int64_t>(cfg.n_layers) * per_layer;
    return w;
}

std::span<const float> WeightStore::embedding_row(int token) const {
    assert(token >= 0 && token < cfg_.vocab_size);
    return std::span<const float>(embedding_.data() +
                                      static_cast<size_t>(token) * cfg_.d_model,
                                  static_cast<size_t>(cfg_.d_model));
}

KvCache::KvCache(const ModelConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    layers_.resize(static_cast<size_t>(cfg.n_layers));
}

std::span<const float> KvCache::key(int layer, int64_t i) const {
    const auto& l = layers_[static_cast<size_t>(layer)];
    return std::span<const float>(
        l.keys.data() + static_cast<size_t>(i) * cfg_.d_model,
        static_cast<size_t>(cfg_.d_model));
}

std::span<const float> KvCache::value(int layer, int64_t i) const {
    const auto& l = layers_[static_cast<size_t>(layer)];
    return std::span<const float>(
        l.values.data() + static_cast<size_t>(i) * cfg_.d_model,
        static_cast<size_t>(cfg_.d_model));
}

std::span<const float> KvCache::layer_keys(int layer) const {
    const auto& l = layers_[static_cast<size_t>(layer)];
    return std::span<const float>(l.keys.data(), l.keys.size());
}

std::span<const float> KvCache::layer_values(int layer) const {
    const auto& l = layers_[static_cast<size_t>(layer)];
    return std::span<const float>(l.values.data(), l.values.size());
}

int64_t KvCache::entry_bytes(const ModelConfig& cfg) {
    return static_cast<int64_t>(cfg.n_layers) * 2 * cfg.d_model * 4;
}

int64_t KvCache::kv_bytes() const { return size() * entry_bytes(cfg_); }

void KvCache::begin_entry(int64_t position, Origin origin) {
    if (entry_open_) throw sequencing_error("cache entry already open");
    if (position < 0 || position >= cfg_.max_positions)
        throw capacity_error("position " + std::to_string(position) +
                             " outside max_positions " +
                             std::to_string(cfg_.max_positions));
    if (origin == Origin::context && position <= last_context_position_)
        throw precondition_error("context positions must be strictly increasing");
    positions_.push_back(position);
    origins_.push_back(origin);
    if (origin == Origin::context) {
        last_context_position_ = position;
        ++context_count_;
    }
    entry_open_ = true;
    layers_written_ = 0;
}

void KvCache::write_layer(int layer, std::span<const float> key,
                          std::span<const float> value) {
    if (!entry_open_) throw sequencing_error("no open cache entry");
    if (layer != layers_written_) throw sequencing_error("layers must be written in order");
    assert(key.size() == static_cast<size_t>(cfg_.d_model));
    assert(value.size() == static_cast<size_t>(cfg_.d_model));
    auto& l = layers_[static_cast<size_t>(layer)];
    l.keys.insert(l.keys.end(), key.begin(), key.end());
    l.values.insert(l.values.end(), value.begin(), value.end());
    ++layers_written_;
}

void KvCache::end_entry() {
    if (!entry_open_) throw sequencing_error("no open cache entry");
    if (layers_written_ != cfg_.n_layers)
        throw sequencing_error("entry incomplete: not all layers written");
    entry_open_ = false;
}

void KvCache::append_entry(int64_t position, Origin origin,
                           std::span<const float> keys,
                           std::span<const float> values) {
    const size_t d = static_cast<size_t>(cfg_.d_model);
    assert(keys.size() == d * static_cast<size_t>(cfg_.n_layers));
    assert(values.size() == d * static_cast<size_t>(cfg_.n_layers));
    begin_entry(position, origin);
    for (int l = 0; l < cfg_.n_layers; ++l) {
        write_layer(l, keys.subspan(static_cast<size_t>(l) * d, d),
                    values.subspan(static_cast<size_t>(l) * d, d));
    }
    end_entry();
}

StepResult forward_step(const WeightStore& w, KvCache& cache, int token,
                        int64_t position) {
    const ModelConfig& cfg = w.config();
    if (token < 0 || token >= cfg.vocab_size)
        throw precondition_error("token id outside vocabulary");
    if (cache.entry_open())
        throw sequencing_error("forward_step with an open cache entry");
    if (position >= cfg.max_positions)
        throw capacity_error("position beyond max_positions");
    // begin_entry re-checks bounds and strict position increase.

    const int d = cfg.d_model;
    const int dff = cfg.d_ff();

    std::vector<float> x(w.embedding_row(token).begin(), w.embedding_row(token).end());
    std::vector<float> normed(static_cast<size_t>(d));
    std::vector<float> q(static_cast<size_t>(d)), k(static_cast<size_t>(d)),
        v(static_cast<size_t>(d));
    std::vector<float> att(static_cast<size_t>(d)), proj(static_cast<size_t>(d));
    std::vector<float> ff(static_cast<size_t>(dff));

    StepResult res;
    cache.begin_entry(position, Origin::context);
    for (int l = 0; l < cfg.n_layers; ++l) {
        const LayerWeights& lw = w.layer(l);
        kernels::rmsnorm(x, lw.attn_norm, normed);
        kernels::matvec(lw.wq, d, d, normed, q);
        kernels::matvec(lw.wk, d, d, normed, k);
        kernels::matvec(lw.wv, d, d, normed, v);
        for (int h = 0; h < cfg.n_heads; ++h) {
            auto qh = std::span<float>(q).subspan(
                static_cast<size_t>(h) * cfg.d_k, static_cast<size_t>(cfg.d_k));
            auto kh = std::span<float>(k).subspan(
                static_cast<size_t>(h) * cfg.d_k, static_cast<size_t>(cfg.d_k));
            kernels::apply_rope(qh, position, cfg.rope_base);
            kernels::apply_rope(kh, position, cfg.rope_base);
        }
        cache.write_layer(l, k, v);
        // Every stored entry is attendable from here: context positions are
        // <= this one and injected entries are reference material by rule.
        kernels::attend(q, cache.layer_keys(l), cache.layer_values(l),
                        cache.size(), cfg.n_heads, cfg.d_k, att);
        kernels::matvec(lw.wo, d, d, att, proj);
        kernels::add_inplace(x, proj);

        kernels::rmsnorm(x, lw.mlp_norm, normed);
        kernels::matvec(lw.w_in, dff, d, normed, ff);
        kernels::relu_inplace(ff);
        kernels::matvec(lw.w_out, d, dff, ff, proj);
        kernels::add_inplace(x, proj);

        if (l == cfg.n_layers - 1) res.final_query = q;
    }
    cache.end_entry();

    res.hidden_last.resize(static_cast<size_t>(d));
    kernels::rmsnorm(x, w.final_norm(), res.hidden_last);
    res.logits.resize(static_cast<size_t>(cfg.vocab_size));
    kernels::matvec(w.unembedding(), cfg.vocab_size, d, res.hidden_last, res.logits);
    return res;
}

std::vector<int> generate_greedy(const WeightStore& w, std::span<const int> prompt,
                                 int n_new) {
    if (prompt.empty()) throw precondition_error("empty prompt");
    KvCache cache(w.config());
    std::vector<int> out(prompt.begin(), prompt.end());
    int64_t pos = 0;
    StepResult last;
    for (int t : prompt) last = forward_step(w, cache, t, pos++);
    for (int i = 0; i < n_new; ++i) {
        const int t = kernels::argmax(last.logits);
        out.push_back(t);
        last = forward_step(w, cache, t, pos++);
    }
    return out;
}

std::vector<int> tokenize_bytes(std::string_view text) {
    std::vector<int> out;
    out.reserve(text.size());
    for (char c : text) out.push_back(static_cast<int>(static_cast<unsigned char>(c)));
    return out;
}

std::string detokenize_bytes(std::span<const int> tokens) {
    std::string out;
    out.reserve(tokens.size());
    for (int t : tokens) out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
    return out;
}

} // namespace cortex
