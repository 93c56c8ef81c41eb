#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace cortex {

enum class EventKind : uint8_t {
    spawned,
    snapshot_read,
    thought_done,
    gated,
    injected,
    rejected,
    aborted,
    trigger_dropped,
    synapse_push,
};
const char* to_string(EventKind kind);

// Logical time is the river token index; no wall-clock fields, so replayed
// runs produce byte-identical logs.
struct AuditEvent {
    int64_t logical_time = 0;
    int64_t agent_id = -1; // -1 for runtime-level events
    EventKind kind = EventKind::spawned;
    std::string detail;
};

std::string csv_escape(std::string_view field);

// Append-only, many-producer event log.
class AuditLog {
public:
    void append(AuditEvent e);
    std::vector<AuditEvent> events() const;
    std::string to_csv() const; // logical_time,agent_id,event,detail

private:
    mutable std::mutex mu_;
    std::vector<AuditEvent> events_;
};

std::string audit_csv(const std::vector<AuditEvent>& events);

} // namespace cortex
