#include "cortex/scheduler.hpp"

#include "cortex/errors.hpp"
#include "cortex/kernels.hpp"

#include <json.hpp>

#include <chrono>
#include <sstream>

namespace cortex {

std::string RunResult::gates_csv() const {
    std::ostringstream os;
    os << GateDecision::csv_header() << '\n';
    for (const auto& g : gates) os << g.csv_row() << '\n';
    return os.str();
}

std::string RunResult::injections_csv() const {
    std::ostringstream os;
    os << InjectionRecord::csv_header() << '\n';
    for (const auto& r : injections) os << r.csv_row() << '\n';
    return os.str();
}

std::string RunResult::triggers_csv() const {
    std::ostringstream os;
    os << "trigger_id,stream_position,payload\n";
    for (const auto& t : triggers) {
        os << t.trigger_id << ',' << t.stream_position << ','
           << csv_escape(t.payload) << '\n';
    }
    return os.str();
}

std::string RunResult::transcript_json() const {
    nlohmann::json j;
    j["prompt_length"] = prompt_length;
    j["tokens"] = transcript_tokens;
    return j.dump();
}

Scheduler::Scheduler(Prism& prism, const RuntimeConfig& rc)
    : prism_(prism), rc_(rc),
      planner_(rc.virtual_base(prism.config()), prism.config().max_positions) {
    rc_.validate(prism.config());
}

Scheduler::~Scheduler() {
    // Reached with live workers only when run() failed part-way.
    synapse_.shutdown();
    for (auto& w : workers_) {
        if (w.joinable()) w.join();
    }
}

std::shared_ptr<const Scheduler::RiverView> Scheduler::river_view() const {
    std::lock_guard<std::mutex> lock(view_mu_);
    return view_;
}

RunResult Scheduler::run(std::string_view prompt, const Script* script) {
    if (ran_) throw sequencing_error("scheduler already ran; use a fresh Prism");
    ran_ = true;
    if (script) {
        for (const auto& entry : script->thoughts) {
            if (entry.tokens.empty())
                throw precondition_error("script entry with no tokens");
            for (int t : entry.tokens) {
                if (t < 0 || t >= prism_.config().vocab_size)
                    throw precondition_error("script token outside vocabulary");
            }
        }
    }

    river_ = prism_.register_agent(AgentRole::river);
    const auto prompt_tokens = tokenize_bytes(prompt);
    if (prompt_tokens.empty()) throw precondition_error("empty prompt");

    RunResult result;
    result.transcript_tokens = prompt_tokens;
    result.prompt_length = static_cast<int64_t>(prompt_tokens.size());

    int64_t pos = 0;
    for (int t : prompt_tokens) step_token(t, pos++, script);
    for (int g = 0; g < rc_.river_budget; ++g) {
        const int t = kernels::argmax(last_logits_);
        result.transcript_tokens.push_back(t);
        step_token(t, pos++, script);
    }

    const int64_t end_time = pos - 1;
    if (rc_.single_lane) {
        step_pending(end_time, /*final_drain=*/true);
    } else {
        synapse_.shutdown();
        for (auto& w : workers_) w.join();
        workers_.clear();
    }
    drain_injections(end_time);

    result.transcript_text = detokenize_bytes(result.transcript_tokens);
    result.audit = audit_.events();
    {
        std::lock_guard<std::mutex> lock(gates_mu_);
        result.gates = gates_;
    }
    result.injections = injections_;
    result.triggers = triggers_;
    result.diagnostics = router_.flush();
    return result;
}

void Scheduler::step_token(int token, int64_t position, const Script* script) {
    if (position >= planner_.reserved_start())
        throw capacity_error("river stream reached the reserved virtual range");
    StepResult r = forward_step(prism_.weights(), *river_.cache, token, position);
    last_logits_ = std::move(r.logits);
    last_query_ = std::move(r.final_query);
    {
        auto view = std::make_shared<RiverView>();
        view->position = position;
        view->hidden = std::move(r.hidden_last);
        std::lock_guard<std::mutex> lock(view_mu_);
        view_ = std::move(view);
    }
    river_now_.store(position);
    boundary(position, token, script);
}

void Scheduler::boundary(int64_t now, int token, const Script* script) {
    drain_injections(now);
    if ((now + 1) % rc_.synapse_push_period == 0) push_synapse(now);
    route_and_spawn(now, token, script);
    if (rc_.single_lane) step_pending(now, /*final_drain=*/false);
}

void Scheduler::drain_injections(int64_t now) {
    std::vector<InjectionRequest> batch;
    {
        std::lock_guard<std::mutex> lock(queue_mu_);
        batch.swap(injection_queue_);
    }
    for (const auto& req : batch) {
        const int64_t base = planner_.reserve(static_cast<int64_t>(req.tokens.size()));
        const KvBlock block = encode_thought(prism_.weights(), req.tokens, base);
        const InjectionRecord rec = inject(*river_.cache, block, req.thought_id, now);
        injections_.push_back(rec);
        std::ostringstream detail;
        detail << "thought=" << req.thought_id << ";base=" << base
               << ";tokens=" << req.tokens.size();
        audit_.append({now, req.agent_id, EventKind::injected, detail.str()});
        finish_agent(req.agent_id);
    }
}

void Scheduler::push_synapse(int64_t now) {
    SynapseSnapshot snap =
        select_landmarks(*river_.cache, last_query_, rc_.k, rc_.lambda);
    const uint64_t version = synapse_.push(std::move(snap));
    std::ostringstream detail;
    detail << "version=" << version;
    audit_.append({now, river_.agent_id, EventKind::synapse_push, detail.str()});
}

void Scheduler::route_and_spawn(int64_t now, int token, const Script* script) {
    const char byte = static_cast<char>(static_cast<unsigned char>(token));
    const auto fired = router_.feed(std::string_view(&byte, 1), now);
    for (const auto& trig : fired) {
        triggers_.push_back(trig);
        if (live_agents_.load() >= rc_.max_stream_agents) {
            std::ostringstream detail;
            detail << "trigger=" << trig.trigger_id << ";payload=" << trig.payload;
            audit_.append({now, -1, EventKind::trigger_dropped, detail.str()});
            continue;
        }
        const AgentHandle handle = prism_.register_agent(AgentRole::stream);
        live_agents_.fetch_add(1);

        AgentTask task;
        task.agent_id = handle.agent_id;
        task.thought_id = next_thought_id_++;
        task.trigger = trig;
        task.spawned_at = now;
        if (script && script_cursor_ < script->thoughts.size()) {
            task.script = script->thoughts[script_cursor_++];
        }
        task.snapshot = synapse_.read_latest();

        std::ostringstream detail;
        detail << "trigger=" << trig.trigger_id << ";payload=" << trig.payload;
        audit_.append({now, task.agent_id, EventKind::spawned, detail.str()});

        if (rc_.single_lane) {
            pending_.push_back(std::move(task));
        } else {
            workers_.emplace_back(&Scheduler::worker_main, this, std::move(task));
        }
    }
}

void Scheduler::step_pending(int64_t now, bool final_drain) {
    std::vector<AgentTask> keep;
    // Tasks run in spawn order; a task with no snapshot re-checks each
    // boundary and aborts after waiting one full push period.
    for (auto& task : pending_) {
        if (!task.snapshot) task.snapshot = synapse_.read_latest();
        if (task.snapshot) {
            run_agent(task);
        } else if (final_drain || now - task.spawned_at >= rc_.synapse_push_period) {
            audit_.append({now, task.agent_id, EventKind::aborted, "empty synapse"});
            finish_agent(task.agent_id);
        } else {
            keep.push_back(std::move(task));
        }
    }
    pending_ = std::move(keep);
}

void Scheduler::worker_main(AgentTask task) {
    if (!task.snapshot) {
        task.snapshot = synapse_.wait_nonempty(std::chrono::milliseconds(5000));
    }
    if (!task.snapshot) {
        audit_.append({river_now_.load(), task.agent_id, EventKind::aborted,
                       "empty synapse"});
        finish_agent(task.agent_id);
        return;
    }
    run_agent(task);
}

void Scheduler::run_agent(AgentTask& task) {
    const WeightStore& w = prism_.weights();
    const SynapseSnapshot& snap = *task.snapshot;
    {
        std::ostringstream detail;
        detail << "version=" << snap.version << ";landmarks=" << snap.landmarks.size();
        audit_.append({river_now_.load(), task.agent_id, EventKind::snapshot_read,
                       detail.str()});
    }

    KvCache& cache = prism_.cache(task.agent_id);
    for (const auto& lm : snap.landmarks) {
        cache.append_entry(lm.source_position, Origin::context, lm.keys, lm.values);
    }
    const auto payload_tokens = tokenize_bytes(task.trigger.payload);
    int64_t pos = snap.source_length;
    StepResult last;
    for (int t : payload_tokens) last = forward_step(w, cache, t, pos++);

    std::vector<int> thought;
    std::vector<float> t_side;
    if (task.script) {
        thought = task.script->tokens;
    } else {
        for (int i = 0; i < rc_.thought_budget; ++i) {
            const int t = kernels::argmax(last.logits);
            thought.push_back(t);
            last = forward_step(w, cache, t, pos++);
        }
        t_side = last.hidden_last;
    }
    {
        std::ostringstream detail;
        detail << "tokens=" << thought.size();
        audit_.append({river_now_.load(), task.agent_id, EventKind::thought_done,
                       detail.str()});
    }

    GateDecision decision;
    if (task.script && task.script->forced_score) {
        decision.score = *task.script->forced_score;
        decision.threshold = rc_.theta;
        decision.accepted = decision.score >= rc_.theta;
        decision.thought_id = task.thought_id;
    } else {
        if (t_side.empty()) {
            // Scripted thought without a forced score: derive the last-token
            // hidden state from a context-blind pass over the tokens.
            t_side = encode_thought(w, thought, 0).last_hidden;
        }
        const auto view = river_view();
        decision = decide(view->hidden, t_side, rc_.theta, task.thought_id);
    }
    {
        std::lock_guard<std::mutex> lock(gates_mu_);
        gates_.push_back(decision);
    }
    {
        std::ostringstream detail;
        detail << "score=" << decision.score << ";accepted=" << decision.accepted;
        audit_.append({river_now_.load(), task.agent_id, EventKind::gated,
                       detail.str()});
    }

    if (decision.accepted) {
        std::lock_guard<std::mutex> lock(queue_mu_);
        injection_queue_.push_back({task.agent_id, task.thought_id, std::move(thought)});
    } else {
        audit_.append({river_now_.load(), task.agent_id, EventKind::rejected, ""});
        finish_agent(task.agent_id);
    }
}

void Scheduler::finish_agent(int64_t agent_id) {
    prism_.release_agent(agent_id);
    live_agents_.fetch_sub(1);
}

AgentHandle Scheduler::spawn_stream_agent(const Trigger& trigger,
                                          const SynapseSnapshot& snapshot) {
    if (snapshot.landmarks.empty())
        throw precondition_error("spawn_stream_agent: empty snapshot");
    if (live_agents_.load() >= rc_.max_stream_agents)
        throw cap_error("spawn_stream_agent: agent cap reached");
    const AgentHandle handle = prism_.register_agent(AgentRole::stream);
    live_agents_.fetch_add(1);

    KvCache& cache = *handle.cache;
    for (const auto& lm : snapshot.landmarks) {
        cache.append_entry(lm.source_position, Origin::context, lm.keys, lm.values);
    }
    const auto payload_tokens = tokenize_bytes(trigger.payload);
    int64_t pos = snapshot.source_length;
    for (int t : payload_tokens) forward_step(prism_.weights(), cache, t, pos++);
    return handle;
}

} // namespace cortex
