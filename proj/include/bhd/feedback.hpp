#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "bhd/errors.hpp"

namespace bhd {

// Affine drive law f = c0 - c_s*(n1+n2) - c_a*(n2-n1), clamped to
// [f_min, f_max] and optionally slew-limited to |df/dt| <= r_max.
struct FeedbackParams {
    double c0 = 0.0;
    double c_s = 0.0;
    double c_a = 0.0;
    double f_min = 0.01;
    double f_max = 4.0;
    std::optional<double> r_max; // absent = unlimited rate of change
    // When slew-limiting is studied deliberately, start the controller at
    // f_min instead of the clamped raw value (forces the initial ramp).
    bool slew_start_at_f_min = false;

    void validate() const {
        if (!(f_min >= 0.0) || !(f_min <= f_max))
            throw ArgumentError("FeedbackParams: need 0 <= f_min <= f_max");
        if (r_max && !(*r_max >= 0.0))
            throw ArgumentError("FeedbackParams: r_max must be >= 0");
        if (!std::isfinite(c0) || !std::isfinite(c_s) || !std::isfinite(c_a))
            throw ArgumentError("FeedbackParams: coefficients must be finite");
    }
};

inline double raw_feedback(double n1, double n2, const FeedbackParams& p) {
    return p.c0 - p.c_s * (n1 + n2) - p.c_a * (n2 - n1);
}

// Last applied drive value; one instance per trajectory.
struct ControllerState {
    double prev_f = 0.0;
};

inline ControllerState controller_init(double n1_0, double n2_0, const FeedbackParams& p) {
    if (p.slew_start_at_f_min) return {p.f_min};
    return {std::clamp(raw_feedback(n1_0, n2_0, p), p.f_min, p.f_max)};
}

// Clamp first, then slew-limit toward the clamped target, so both bounds
// hold simultaneously.
inline double apply_feedback(double raw, ControllerState& state, double dt,
                             const FeedbackParams& p) {
    if (!(dt > 0.0)) throw ArgumentError("apply_feedback: dt must be positive");
    double f = std::clamp(raw, p.f_min, p.f_max);
    if (p.r_max) {
        const double bound = *p.r_max * dt;
        f = std::clamp(f, state.prev_f - bound, state.prev_f + bound);
    }
    state.prev_f = f;
    return f;
}

} // namespace bhd
