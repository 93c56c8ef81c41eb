#pragma once

#include "cortex/audit.hpp"
#include "cortex/gate.hpp"
#include "cortex/injector.hpp"
#include "cortex/prism.hpp"
#include "cortex/router.hpp"
#include "cortex/synapse.hpp"

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace cortex {

// Replaces a stream agent's generation with fixed tokens; with forced_score
// set, the gate decision is taken from that value instead of the model's
// hidden states. Entries are consumed in spawn order.
struct ScriptEntry {
    std::vector<int> tokens;
    std::optional<double> forced_score;
};

struct Script {
    std::vector<ScriptEntry> thoughts;
};

struct RunResult {
    std::vector<int> transcript_tokens; // prompt + generated
    std::string transcript_text;
    int64_t prompt_length = 0;
    std::vector<AuditEvent> audit;
    std::vector<GateDecision> gates;
    std::vector<InjectionRecord> injections;
    std::vector<Trigger> triggers;
    std::vector<RouterDiagnostic> diagnostics;

    std::string audit_csv() const { return cortex::audit_csv(audit); }
    std::string gates_csv() const;
    std::string injections_csv() const;
    std::string triggers_csv() const;
    std::string transcript_json() const;
};

// River & stream runtime: one high-priority generation lane that is never
// queued behind side work, plus up to max_stream_agents worker lanes that
// communicate only through the synapse buffer, the injection queue, and the
// audit log. With single_lane set, workers execute at token boundaries on
// the river lane, which makes whole runs byte-replayable.
class Scheduler {
public:
    Scheduler(Prism& prism, const RuntimeConfig& rc);
    ~Scheduler();
    Scheduler(const Scheduler&) = delete;
    Scheduler& operator=(const Scheduler&) = delete;

    // Greedy-decodes river_budget tokens after the prompt, pushing a
    // snapshot every synapse_push_period tokens, spawning a stream agent per
    // router trigger, gating each finished thought, and applying accepted
    // injections at token boundaries. One run per Prism.
    RunResult run(std::string_view prompt, const Script* script = nullptr);

    // Registers a stream agent and materializes its cache from the snapshot
    // landmarks followed by the tokenized payload. Throws cap_error at the
    // live-agent cap and precondition_error on an empty snapshot.
    AgentHandle spawn_stream_agent(const Trigger& trigger,
                                   const SynapseSnapshot& snapshot);

    SynapseBuffer& synapse() { return synapse_; }
    int64_t live_stream_agents() const { return live_agents_.load(); }

private:
    struct AgentTask {
        int64_t agent_id = -1;
        int64_t thought_id = -1;
        Trigger trigger;
        std::optional<ScriptEntry> script;
        int64_t spawned_at = 0;
        std::shared_ptr<const SynapseSnapshot> snapshot;
    };

    struct InjectionRequest {
        int64_t agent_id = -1;
        int64_t thought_id = -1;
        std::vector<int> tokens;
    };

    struct RiverView {
        int64_t position = -1;
        std::vector<float> hidden;
    };

    void step_token(int token, int64_t position, const Script* script);
    void boundary(int64_t now, int token, const Script* script);
    void drain_injections(int64_t now);
    void push_synapse(int64_t now);
    void route_and_spawn(int64_t now, int token, const Script* script);
    void step_pending(int64_t now, bool final_drain);
    void run_agent(AgentTask& task);
    void worker_main(AgentTask task);
    void finish_agent(int64_t agent_id);
    std::shared_ptr<const RiverView> river_view() const;

    Prism& prism_;
    RuntimeConfig rc_;
    SynapseBuffer synapse_;
    Router router_;
    AuditLog audit_;
    VirtualPositionPlanner planner_;

    AgentHandle river_;
    std::vector<float> last_logits_;
    std::vector<float> last_query_;

    mutable std::mutex view_mu_;
    std::shared_ptr<const RiverView> view_;
    std::atomic<int64_t> river_now_{-1};

    std::mutex queue_mu_;
    std::vector<InjectionRequest> injection_queue_;

    std::mutex gates_mu_;
    std::vector<GateDecision> gates_;

    std::vector<InjectionRecord> injections_; // river lane only
    std::vector<Trigger> triggers_;           // river lane only
    std::vector<AgentTask> pending_;          // single-lane agents
    std::vector<std::thread> workers_;

    std::atomic<int64_t> live_agents_{0};
    int64_t next_thought_id_ = 0;
    size_t script_cursor_ = 0;
    bool ran_ = false;
};

} // namespace cortex
