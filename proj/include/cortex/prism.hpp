#pragma once

#include "cortex/model.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace cortex {

enum class AgentRole : uint8_t { river, stream };
enum class AgentPriority : uint8_t { high, medium };

struct AgentHandle {
    int64_t agent_id = -1;
    AgentRole role = AgentRole::stream;
    AgentPriority priority = AgentPriority::medium;
    KvCache* cache = nullptr; // owned by the registry, stable address
};

// Decomposition of runtime memory: one constant weight term plus one K/V
// term per registered agent. All byte counts are derived from structure
// sizes, never from the allocator.
struct MemoryReport {
    int64_t weight_bytes = 0;
    std::vector<int64_t> per_agent_bytes; // registration order, river included
    int64_t river_bytes = 0;
    int64_t total_bytes = 0;  // weight_bytes + sum(per_agent_bytes), exact
    int64_t agent_count = 0;  // stream agents only

    int64_t delta_bytes() const { return total_bytes - weight_bytes - river_bytes; }

    static std::string csv_header();
    // agent_count, weight_bytes, delta_bytes, per_agent_bytes
    std::string csv_row() const;
};

// One immutable WeightStore shared read-only by every agent, plus the
// per-agent cache registry. Registration and lookup are thread safe; each
// cache itself has a single owner lane at a time.
class Prism {
public:
    explicit Prism(const ModelConfig& cfg) : weights_(WeightStore::init(cfg)) {}
    explicit Prism(WeightStore weights) : weights_(std::move(weights)) {}

    const WeightStore& weights() const { return weights_; }
    const ModelConfig& config() const { return weights_.config(); }

    // Throws topology_error on a second river. Ids start at 0 and are
    // never reused within a runtime.
    AgentHandle register_agent(AgentRole role);

    KvCache& cache(int64_t agent_id);
    bool has_agent(int64_t agent_id) const;
    // Drops the agent's cache; the id stays burned.
    void release_agent(int64_t agent_id);

    int64_t river_id() const;
    int64_t stream_count() const;

    MemoryReport memory_report() const;

private:
    struct AgentRecord {
        AgentRole role;
        std::unique_ptr<KvCache> cache;
    };

    mutable std::mutex mu_;
    WeightStore weights_;
    std::map<int64_t, AgentRecord> agents_; // ordered by id = registration order
    int64_t next_id_ = 0;
    int64_t river_id_ = -1;
};

} // namespace cortex
