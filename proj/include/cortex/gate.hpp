#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace cortex {

struct GateDecision {
    double score = 0.0; // NaN when degenerate
    double threshold = 0.5;
    bool accepted = false;
    bool degenerate = false; // zero-length input; always rejected
    int64_t thought_id = -1;

    static std::string csv_header(); // thought_id,score,theta,accepted
    std::string csv_row() const;
};

// Cosine similarity in double precision, clamped to [-1, 1]. Throws
// degenerate_input_error when either vector has zero norm.
double gate_score(std::span<const float> h_main, std::span<const float> t_side);

// accepted iff score >= theta (an exact-threshold score passes). Zero-norm
// inputs come back rejected with the degenerate flag instead of a throw.
GateDecision decide(std::span<const float> h_main, std::span<const float> t_side,
                    double theta, int64_t thought_id = -1);

} // namespace cortex
