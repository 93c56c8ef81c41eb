#include "cortex/gate.hpp"

#include "cortex/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cortex {

std::string GateDecision::csv_header() { return "thought_id,score,theta,accepted"; }

std::string GateDecision::csv_row() const {
    std::ostringstream os;
    os.precision(17);
    os << thought_id << ',';
    if (degenerate) {
        os << "nan";
    } else {
        os << score;
    }
    os << ',' << threshold << ',' << (accepted ? 1 : 0);
    return os.str();
}

double gate_score(std::span<const float> h_main, std::span<const float> t_side) {
    if (h_main.size() != t_side.size())
        throw precondition_error("gate_score: width mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < h_main.size(); ++i) {
        const double a = h_main[i];
        const double b = t_side[i];
        dot += a * b;
        na += a * a;
        nb += b * b;
    }
    if (na == 0.0 || nb == 0.0)
        throw degenerate_input_error("gate_score: zero-norm input");
    const double s = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(s, -1.0, 1.0);
}

GateDecision decide(std::span<const float> h_main, std::span<const float> t_side,
                    double theta, int64_t thought_id) {
    if (theta < -1.0 || theta > 1.0)
        throw precondition_error("decide: theta must be in [-1,1]");
    GateDecision d;
    d.threshold = theta;
    d.thought_id = thought_id;
    try {
        d.score = gate_score(h_main, t_side);
        d.accepted = d.score >= theta;
    } catch (const degenerate_input_error&) {
        d.score = std::numeric_limits<double>::quiet_NaN();
        d.degenerate = true;
        d.accepted = false;
    }
    return d;
}

} // namespace cortex
