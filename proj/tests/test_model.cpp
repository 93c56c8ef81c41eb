#include "cortex/errors.hpp"
#include "cortex/kernels.hpp"
#include "cortex/model.hpp"
#include "cortex/ref_model.hpp"
#include "cortex/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace cortex;

namespace {

ModelConfig toy_config() {
    ModelConfig cfg;
    cfg.n_layers = 4;
    cfg.n_heads = 4;
    cfg.d_model = 64;
    cfg.d_k = 16;
    cfg.vocab_size = 256;
    cfg.max_positions = 8192;
    cfg.seed = 42;
    return cfg;
}

bool rel_close(double a, double b, double tol = 1e-6) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

} // namespace

TEST_CASE("init_weights: byte count equals the hand-derived closed form") {
    const WeightStore w = WeightStore::init(toy_config());
    // Worked by hand for (layers=4, heads=4, d=64, d_ff=256, vocab=256):
    //   embedding        256*64           = 16384
    //   per layer        64 + 4*64*64 + 64 + 256*64 + 64*256 = 49280
    //   4 layers                          = 197120
    //   final norm                        = 64
    //   unembedding      256*64           = 16384
    //   parameters                        = 229952 -> 919808 bytes at fp32
    CHECK(w.parameter_count() == 229952);
    CHECK(w.total_bytes() == 919808);
}

TEST_CASE("init_weights: identical (config, seed) gives bit-identical stores") {
    const auto cfg = toy_config();
    const WeightStore a = WeightStore::init(cfg);
    const WeightStore b = WeightStore::init(cfg);
    CHECK(a.embedding_row(137).size() == b.embedding_row(137).size());
    for (size_t i = 0; i < a.embedding_row(137).size(); ++i) {
        CHECK(a.embedding_row(137)[i] == b.embedding_row(137)[i]);
    }
    for (int l = 0; l < cfg.n_layers; ++l) {
        CHECK(a.layer(l).wq == b.layer(l).wq);
        CHECK(a.layer(l).w_out == b.layer(l).w_out);
    }
    CHECK(a.unembedding() == b.unembedding());

    auto other = cfg;
    other.seed = 43;
    const WeightStore c = WeightStore::init(other);
    CHECK(a.layer(0).wq != c.layer(0).wq);
}

TEST_CASE("init_weights: rejects inconsistent dimensions") {
    auto cfg = toy_config();
    cfg.d_model = 65;
    CHECK_THROWS_AS((void)WeightStore::init(cfg), config_error);
    cfg = toy_config();
    cfg.rope_base = 0.0;
    CHECK_THROWS_AS((void)WeightStore::init(cfg), config_error);
    cfg = toy_config();
    cfg.n_heads = 0;
    CHECK_THROWS_AS((void)WeightStore::init(cfg), config_error);
}

TEST_CASE("forward_step: appends exactly one entry per layer") {
    const auto cfg = toy_config();
    const WeightStore w = WeightStore::init(cfg);
    KvCache cache(cfg);
    const StepResult r = forward_step(w, cache, 65, 0);
    CHECK(cache.size() == 1);
    for (int l = 0; l < cfg.n_layers; ++l) {
        CHECK(cache.layer_keys(l).size() == static_cast<size_t>(cfg.d_model));
    }
    CHECK(r.logits.size() == static_cast<size_t>(cfg.vocab_size));
    CHECK(r.hidden_last.size() == static_cast<size_t>(cfg.d_model));
    CHECK(r.final_query.size() == static_cast<size_t>(cfg.d_model));
}

TEST_CASE("forward_step: pure given identical inputs") {
    const auto cfg = toy_config();
    const WeightStore w = WeightStore::init(cfg);
    KvCache a(cfg), b(cfg);
    forward_step(w, a, 10, 0);
    forward_step(w, b, 10, 0);
    const StepResult ra = forward_step(w, a, 20, 1);
    const StepResult rb = forward_step(w, b, 20, 1);
    CHECK(ra.logits == rb.logits);
    CHECK(ra.hidden_last == rb.hidden_last);
}

TEST_CASE("forward_step: incremental decode matches the no-cache reference") {
    const auto cfg = toy_config();
    const WeightStore w = WeightStore::init(cfg);
    const std::vector<int> prompt = {72, 105, 33};

    KvCache cache(cfg);
    std::vector<StepResult> inc;
    for (size_t i = 0; i < prompt.size(); ++i) {
        inc.push_back(forward_step(w, cache, prompt[i], static_cast<int64_t>(i)));
    }

    std::vector<ref::SeqItem> items;
    for (size_t i = 0; i < prompt.size(); ++i) {
        items.push_back({prompt[i], static_cast<int64_t>(i), Origin::context, 0});
    }
    const auto full = ref::forward_sequence(w, items);
    for (size_t i = 0; i < prompt.size(); ++i) {
        for (int v = 0; v < cfg.vocab_size; ++v) {
            CHECK(rel_close(inc[i].logits[static_cast<size_t>(v)],
                            full.logits[i][static_cast<size_t>(v)]));
        }
        for (int c = 0; c < cfg.d_model; ++c) {
            CHECK(rel_close(inc[i].hidden_last[static_cast<size_t>(c)],
                            full.hidden[i][static_cast<size_t>(c)]));
        }
    }
}

TEST_CASE("forward_step: longer greedy decode still matches the reference") {
    const auto cfg = toy_config();
    const WeightStore w = WeightStore::init(cfg);
    const auto tokens = generate_greedy(w, tokenize_bytes("hello world"), 21);

    KvCache cache(cfg);
    StepResult last;
    for (size_t i = 0; i < tokens.size(); ++i) {
        last = forward_step(w, cache, tokens[i], static_cast<int64_t>(i));
    }
    std::vector<ref::SeqItem> items;
    for (size_t i = 0; i < tokens.size(); ++i) {
        items.push_back({tokens[i], static_cast<int64_t>(i), Origin::context, 0});
    }
    const auto full = ref::forward_sequence(w, items);
    for (int v = 0; v < cfg.vocab_size; ++v) {
        CHECK(rel_close(last.logits[static_cast<size_t>(v)],
                        full.logits.back()[static_cast<size_t>(v)]));
    }
}

TEST_CASE("forward_step: capacity and ordering errors") {
    auto cfg = toy_config();
    cfg.max_positions = 4;
    const WeightStore w = WeightStore::init(cfg);
    KvCache cache(cfg);
    forward_step(w, cache, 1, 0);
    CHECK_THROWS_AS((void)forward_step(w, cache, 1, 4), capacity_error);
    CHECK_THROWS_AS((void)forward_step(w, cache, 1, 0), precondition_error);
    CHECK_THROWS_AS((void)forward_step(w, cache, 999, 1), precondition_error);
}

TEST_CASE("kv cache: append-only, prior entries stay bit-identical") {
    const auto cfg = toy_config();
    const WeightStore w = WeightStore::init(cfg);
    KvCache cache(cfg);
    forward_step(w, cache, 7, 0);
    forward_step(w, cache, 8, 1);
    std::vector<std::vector<float>> keys_before, values_before;
    for (int l = 0; l < cfg.n_layers; ++l) {
        keys_before.emplace_back(cache.layer_keys(l).begin(), cache.layer_keys(l).end());
        values_before.emplace_back(cache.layer_values(l).begin(),
                                   cache.layer_values(l).end());
    }
    forward_step(w, cache, 9, 2);
    forward_step(w, cache, 10, 3);
    for (int l = 0; l < cfg.n_layers; ++l) {
        const auto keys_after = cache.layer_keys(l);
        const auto values_after = cache.layer_values(l);
        for (size_t i = 0; i < keys_before[static_cast<size_t>(l)].size(); ++i) {
            CHECK(keys_after[i] == keys_before[static_cast<size_t>(l)][i]);
            CHECK(values_after[i] == values_before[static_cast<size_t>(l)][i]);
        }
    }
}

TEST_CASE("kv cache: entry protocol enforces complete layered writes") {
    const auto cfg = toy_config();
    KvCache cache(cfg);
    std::vector<float> zeros(static_cast<size_t>(cfg.d_model), 0.0f);
    cache.begin_entry(0, Origin::context);
    CHECK_THROWS_AS(cache.begin_entry(1, Origin::context), sequencing_error);
    CHECK_THROWS_AS(cache.end_entry(), sequencing_error);
    CHECK_THROWS_AS(cache.write_layer(2, zeros, zeros), sequencing_error);
    for (int l = 0; l < cfg.n_layers; ++l) cache.write_layer(l, zeros, zeros);
    cache.end_entry();
    CHECK(cache.size() == 1);
}

TEST_CASE("byte tokenizer: round trips raw bytes") {
    const std::string text = "hi \xff\x01 there";
    const auto tokens = tokenize_bytes(text);
    CHECK(tokens.size() == text.size());
    CHECK(detokenize_bytes(tokens) == text);
}
