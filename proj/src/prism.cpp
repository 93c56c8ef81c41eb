#include "cortex/prism.hpp"

#include "cortex/errors.hpp"

#include <sstream>

namespace cortex {

std::string MemoryReport::csv_header() {
    return "agent_count,weight_bytes,delta_bytes,per_agent_bytes";
}

std::string MemoryReport::csv_row() const {
    const int64_t delta = delta_bytes();
    const int64_t per_agent = agent_count > 0 ? delta / agent_count : 0;
    std::ostringstream os;
    os << agent_count << ',' << weight_bytes << ',' << delta << ',' << per_agent;
    return os.str();
}

AgentHandle Prism::register_agent(AgentRole role) {
    std::lock_guard<std::mutex> lock(mu_);
    if (role == AgentRole::river && river_id_ >= 0)
        throw topology_error("a river agent is already registered");
    const int64_t id = next_id_++;
    auto [it, inserted] = agents_.emplace(
        id, AgentRecord{role, std::make_unique<KvCache>(weights_.config())});
    (void)inserted;
    if (role == AgentRole::river) river_id_ = id;
    AgentHandle h;
    h.agent_id = id;
    h.role = role;
    h.priority = role == AgentRole::river ? AgentPriority::high : AgentPriority::medium;
    h.cache = it->second.cache.get();
    return h;
}

KvCache& Prism::cache(int64_t agent_id) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = agents_.find(agent_id);
    if (it == agents_.end()) throw precondition_error("unknown agent id");
    return *it->second.cache;
}

bool Prism::has_agent(int64_t agent_id) const {
    std::lock_guard<std::mutex> lock(mu_);
    return agents_.count(agent_id) > 0;
}

void Prism::release_agent(int64_t agent_id) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = agents_.find(agent_id);
    if (it == agents_.end()) throw precondition_error("unknown agent id");
    if (agent_id == river_id_) river_id_ = -1;
    agents_.erase(it);
}

int64_t Prism::river_id() const {
    std::lock_guard<std::mutex> lock(mu_);
    return river_id_;
}

int64_t Prism::stream_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    int64_t n = 0;
    for (const auto& [id, rec] : agents_) {
        (void)id;
        if (rec.role == AgentRole::stream) ++n;
    }
    return n;
}

MemoryReport Prism::memory_report() const {
    std::lock_guard<std::mutex> lock(mu_);
    MemoryReport r;
    r.weight_bytes = weights_.total_bytes();
    r.total_bytes = r.weight_bytes;
    for (const auto& [id, rec] : agents_) {
        const int64_t bytes = rec.cache->kv_bytes();
        r.per_agent_bytes.push_back(bytes);
        r.total_bytes += bytes;
        if (rec.role == AgentRole::stream) {
            ++r.agent_count;
        } else if (id == river_id_) {
            r.river_bytes = bytes;
        }
    }
    return r;
}

} // namespace cortex
