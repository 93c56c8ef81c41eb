#include "cortex/router.hpp"

#include <cctype>

namespace cortex {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string clip(const std::string& s, size_t n = 32) {
    return s.size() <= n ? s : s.substr(0, n) + "...";
}

} // namespace

const char* to_string(RouterIssue issue) {
    switch (issue) {
    case RouterIssue::unterminated: return "unterminated";
    case RouterIssue::payload_overflow: return "payload_overflow";
    case RouterIssue::empty_payload: return "empty_payload";
    }
    return "unknown";
}

std::vector<Trigger> Router::feed(std::string_view chunk, int64_t stream_position) {
    std::vector<Trigger> out;
    for (char c : chunk) consume(c, stream_position, out);
    return out;
}

void Router::consume(char c, int64_t stream_position, std::vector<Trigger>& out) {
    if (in_payload_) {
        if (c == ']') {
            std::string trimmed = trim(payload_);
            if (trimmed.empty()) {
                diagnostics_.push_back(
                    {RouterIssue::empty_payload, stream_position, payload_});
            } else {
                out.push_back({next_trigger_id_++, stream_position, std::move(trimmed)});
            }
            payload_.clear();
            in_payload_ = false;
            prefix_len_ = 0;
            return;
        }
        if (payload_.size() >= max_payload_) {
            diagnostics_.push_back(
                {RouterIssue::payload_overflow, stream_position, clip(payload_)});
            payload_.clear();
            in_payload_ = false;
            prefix_len_ = 0;
            // The overflowing character is rescanned as ordinary text so a
            // fresh '[' can still open a new pattern.
            consume(c, stream_position, out);
            return;
        }
        payload_.push_back(c);
        return;
    }

    if (c == kPattern[prefix_len_]) {
        if (++prefix_len_ == kPattern.size()) {
            in_payload_ = true;
            payload_.clear();
        }
        return;
    }
    // '[' is the only restart point inside the literal prefix.
    prefix_len_ = c == kPattern[0] ? 1 : 0;
}

std::vector<RouterDiagnostic> Router::flush() {
    std::vector<RouterDiagnostic> out = std::move(diagnostics_);
    diagnostics_.clear();
    if (in_payload_) {
        out.push_back({RouterIssue::unterminated, -1, clip(payload_)});
    } else if (prefix_len_ > 0) {
        out.push_back({RouterIssue::unterminated, -1,
                       std::string(kPattern.substr(0, prefix_len_))});
    }
    payload_.clear();
    in_payload_ = false;
    prefix_len_ = 0;
    return out;
}

} // namespace cortex
