#pragma once

#include <stdexcept>

namespace cortex {

// Contract violations carry a category so callers (and tests) can tell
// a bad configuration from a runtime sequencing bug.

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Position or byte budget exceeded (cache capacity, virtual-position range).
struct capacity_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runtime topology rule broken (e.g. a second river agent).
struct topology_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operation applied at the wrong time (mid-step injection, unfinished entry).
struct sequencing_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct precondition_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Stream-agent cap reached.
struct cap_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Zero-length vector fed to a similarity score.
struct degenerate_input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace cortex
