#include "cortex/audit.hpp"

#include <sstream>

namespace cortex {

const char* to_string(EventKind kind) {
    switch (kind) {
    case EventKind::spawned: return "spawned";
    case EventKind::snapshot_read: return "snapshot_read";
    case EventKind::thought_done: return "thought_done";
    case EventKind::gated: return "gated";
    case EventKind::injected: return "injected";
    case EventKind::rejected: return "rejected";
    case EventKind::aborted: return "aborted";
    case EventKind::trigger_dropped: return "trigger_dropped";
    case EventKind::synapse_push: return "synapse_push";
    }
    return "unknown";
}

std::string csv_escape(std::string_view field) {
    const bool needs_quotes =
        field.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs_quotes) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

void AuditLog::append(AuditEvent e) {
    std::lock_guard<std::mutex> lock(mu_);
    events_.push_back(std::move(e));
}

std::vector<AuditEvent> AuditLog::events() const {
    std::lock_guard<std::mutex> lock(mu_);
    return events_;
}

std::string audit_csv(const std::vector<AuditEvent>& events) {
    std::ostringstream os;
    os << "logical_time,agent_id,event,detail\n";
    for (const auto& e : events) {
        os << e.logical_time << ',' << e.agent_id << ',' << to_string(e.kind) << ','
           << csv_escape(e.detail) << '\n';
    }
    return os.str();
}

std::string AuditLog::to_csv() const { return audit_csv(events()); }

} // namespace cortex
