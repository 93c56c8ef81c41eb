#include "cortex/errors.hpp"
#include "cortex/prism.hpp"
#include "cortex/rng.hpp"

#include <doctest.h>

#include <vector>

using namespace cortex;

namespace {

ModelConfig toy_config() {
    ModelConfig cfg;
    cfg.seed = 42;
    return cfg;
}

// Fill a cache with n synthetic entries so byte accounting has substance.
void fill_entries(KvCache& cache, int64_t n, int64_t first_position = 0) {
    const auto& cfg = cache.config();
    Rng rng(99);
    std::vector<float> keys(static_cast<size_t>(cfg.n_layers) * cfg.d_model);
    std::vector<float> values(keys.size());
    for (int64_t i = 0; i < n; ++i) {
        for (float& v : keys) v = static_cast<float>(rng.next_gaussian(0.0, 1.0));
        for (float& v : values) v = static_cast<float>(rng.next_gaussian(0.0, 1.0));
        cache.append_entry(first_position + i, Origin::context, keys, values);
    }
}

} // namespace

TEST_CASE("prism: first river gets id 0 and high priority") {
    Prism prism(toy_config());
    const AgentHandle h = prism.register_agent(AgentRole::river);
    CHECK(h.agent_id == 0);
    CHECK(h.role == AgentRole::river);
    CHECK(h.priority == AgentPriority::high);
    CHECK(prism.river_id() == 0);
}

TEST_CASE("prism: a second river is a topology error") {
    Prism prism(toy_config());
    prism.register_agent(AgentRole::river);
    CHECK_THROWS_AS(prism.register_agent(AgentRole::river), topology_error);
    // Streams are unaffected by the river rule.
    const AgentHandle s = prism.register_agent(AgentRole::stream);
    CHECK(s.priority == AgentPriority::medium);
}

TEST_CASE("prism: stream registrations never duplicate weights") {
    Prism prism(toy_config());
    prism.register_agent(AgentRole::river);
    const int64_t baseline = prism.memory_report().weight_bytes;
    for (int i = 0; i < 100; ++i) prism.register_agent(AgentRole::stream);
    const MemoryReport report = prism.memory_report();
    CHECK(report.weight_bytes == baseline);
    CHECK(report.agent_count == 100);
}

TEST_CASE("prism: agent ids are never reused") {
    Prism prism(toy_config());
    const auto a = prism.register_agent(AgentRole::stream);
    prism.release_agent(a.agent_id);
    const auto b = prism.register_agent(AgentRole::stream);
    CHECK(b.agent_id == a.agent_id + 1);
}

TEST_CASE("memory report: zero streams means weights plus the river cache") {
    Prism prism(toy_config());
    const AgentHandle river = prism.register_agent(AgentRole::river);
    fill_entries(*river.cache, 12);
    const MemoryReport report = prism.memory_report();
    CHECK(report.agent_count == 0);
    CHECK(report.total_bytes == report.weight_bytes + river.cache->kv_bytes());
    CHECK(report.river_bytes == river.cache->kv_bytes());
}

TEST_CASE("memory report: k-landmark view bytes match the closed form") {
    // k=64 entries, 4 layers, d_model=64, fp32 K and V:
    //   64 * 4 * 2 * 64 * 4 = 131072 bytes per agent, worked by hand.
    Prism prism(toy_config());
    prism.register_agent(AgentRole::river);
    const AgentHandle s = prism.register_agent(AgentRole::stream);
    fill_entries(*s.cache, 64);
    CHECK(s.cache->kv_bytes() == 131072);
    const MemoryReport report = prism.memory_report();
    CHECK(report.total_bytes == report.weight_bytes + 131072);
}

TEST_CASE("memory report: exact affine growth and per-agent constancy") {
    const auto cfg = toy_config();
    int64_t per_agent_seen = -1;
    for (int64_t n : {10, 50, 100}) {
        Prism prism(cfg);
        prism.register_agent(AgentRole::river);
        for (int64_t i = 0; i < n; ++i) {
            const AgentHandle s = prism.register_agent(AgentRole::stream);
            fill_entries(*s.cache, 64);
        }
        const MemoryReport report = prism.memory_report();
        const int64_t per_agent = report.delta_bytes() / n;
        CHECK(report.total_bytes == report.weight_bytes + n * per_agent);
        CHECK(report.delta_bytes() % n == 0);
        if (per_agent_seen < 0) per_agent_seen = per_agent;
        CHECK(per_agent == per_agent_seen);
    }
}

TEST_CASE("memory report: csv row mirrors agent_count/weight/delta/per_agent") {
    Prism prism(toy_config());
    prism.register_agent(AgentRole::river);
    for (int i = 0; i < 3; ++i) {
        const AgentHandle s = prism.register_agent(AgentRole::stream);
        fill_entries(*s.cache, 2);
    }
    const MemoryReport report = prism.memory_report();
    const int64_t entry = KvCache::entry_bytes(prism.config());
    CHECK(report.csv_row() == "3," + std::to_string(report.weight_bytes) + "," +
                                  std::to_string(3 * 2 * entry) + "," +
                                  std::to_string(2 * entry));
}

TEST_CASE("compression structure: k-landmark bytes never exceed k/L of a clone") {
    const auto cfg = toy_config();
    const int64_t entry = KvCache::entry_bytes(cfg);
    for (int64_t l : {64, 256, 4096}) {
        for (int64_t k : {1, 16, 64}) {
            if (k > l) continue;
            const int64_t view_bytes = k * entry;
            const int64_t clone_bytes = l * entry;
            CHECK(static_cast<double>(view_bytes) <=
                  (static_cast<double>(k) / static_cast<double>(l)) *
                      static_cast<double>(clone_bytes) + 1e-9);
        }
    }
}
