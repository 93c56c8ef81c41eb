#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cortex {

// Grammar: literal "[TASK:" (case-sensitive), then any run of non-']'
// characters, then ']'. No nesting; payloads longer than the cap become a
// diagnostic instead of a trigger.
struct Trigger {
    int64_t trigger_id = 0;
    int64_t stream_position = -1; // token index where ']' completed
    std::string payload;          // trimmed, non-empty
};

enum class RouterIssue : uint8_t { unterminated, payload_overflow, empty_payload };
const char* to_string(RouterIssue issue);

struct RouterDiagnostic {
    RouterIssue issue;
    int64_t stream_position = -1;
    std::string partial; // truncated payload context
};

// Incremental scanner over the river's emitted text. Chunk boundaries are
// arbitrary; the state machine consumes one character at a time, so any
// partition of a stream yields the same triggers as one whole-string feed.
class Router {
public:
    explicit Router(size_t max_payload = 1024) : max_payload_(max_payload) {}

    // stream_position tags triggers completed within this chunk.
    std::vector<Trigger> feed(std::string_view chunk, int64_t stream_position = -1);

    // Returns accumulated diagnostics plus an unterminated-pattern entry if
    // the stream ended mid-trigger, then resets all state.
    std::vector<RouterDiagnostic> flush();

private:
    void consume(char c, int64_t stream_position, std::vector<Trigger>& out);

    static constexpr std::string_view kPattern = "[TASK:";

    size_t max_payload_;
    size_t prefix_len_ = 0;
    bool in_payload_ = false;
    std::string payload_;
    int64_t next_trigger_id_ = 0;
    std::vector<RouterDiagnostic> diagnostics_;
};

} // namespace cortex
