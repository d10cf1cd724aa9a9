#ifndef DHN_CONTROL_HPP
#define DHN_CONTROL_HPP

#include <algorithm>
#include <cmath>
#include <optional>

#include "dhn/core.hpp"
#include "dhn/model.hpp"

namespace dhn {

/**
 * @brief Discrete PID with clamped output and conditional anti-windup.
 *
 * The error convention is `setpoint - measurement`, so a positive gain opens
 * the user branch further when the controlled mass runs below its setpoint.
 * Integration is suspended while the output is saturated *and* the error
 * pushes further into the saturated side; this keeps the integral state from
 * winding up during long saturation stretches (cold starts, cooling phases)
 * while still letting it unwind as soon as the error changes sign.
 */
struct PidState {
    double integral = 0.0;
    double prev_error = 0.0;
    bool has_prev = false;
    double output = 0.0;
};

/**
 * @brief First controller evaluation, before any time has elapsed.
 *
 * Proportional-only: primes the derivative memory and leaves the integral
 * state untouched, so the initial output is reproducible regardless of the
 * sample period chosen later.
 */
inline double pid_init(const PidConfig& cfg, PidState& st, double setpoint, double measurement) {
    const double error = setpoint - measurement;
    st.prev_error = error;
    st.has_prev = true;
    st.output = clamp(cfg.kp * error, cfg.u_min, cfg.u_max);
    return st.output;
}

inline double pid_step(const PidConfig& cfg, PidState& st, double setpoint, double measurement,
                       double dt) {
    if (!(dt > 0.0)) throw validation_error("PID step requires dt > 0");
    const double error = setpoint - measurement;
    const double deriv = st.has_prev ? (error - st.prev_error) / dt : 0.0;
    const double unsat = cfg.kp * error + st.integral + cfg.kd * deriv;
    double out = clamp(unsat, cfg.u_min, cfg.u_max);
    const bool saturated_hi = unsat > cfg.u_max && error > 0.0;
    const bool saturated_lo = unsat < cfg.u_min && error < 0.0;
    if (!saturated_hi && !saturated_lo) st.integral += cfg.ki * error * dt;
    st.prev_error = error;
    st.has_prev = true;
    st.output = out;
    return out;
}

/**
 * @brief Ambient-emulation heat command for an actively cooled thermal mass.
 *
 * The active element removes (or injects) heat so that the bench mass sees the
 * same nondimensional ambient forcing as its full-scale counterpart:
 *
 *     q = hAs_act * ((Ta_bench - setpoint) - k_T * (Ta_full - setpoint_full))
 *
 * with `k_T` the temperature scale ratio between the two networks.  A positive
 * result is heat *removed* from the mass.  The command is clamped to
 * [0, max_power]; the device cannot push heat into the mass.
 */
inline double peltier_command(double hAs_act_WpK, double ambient_bench_C, double setpoint_bench_C,
                              double ambient_full_C, double setpoint_full_C, double k_T,
                              double max_power_W) {
    const double raw = hAs_act_WpK * ((ambient_bench_C - setpoint_bench_C) -
                                      k_T * (ambient_full_C - setpoint_full_C));
    return clamp(raw, 0.0, max_power_W);
}

/**
 * @brief First-order actuator tracking: exact exponential update over one step.
 *
 * Returns the applied power after `dt` seconds of relaxing from `applied`
 * toward `command` with time constant `tau`.  `tau == 0` means instantaneous.
 */
inline double track_first_order(double applied, double command, double tau_s, double dt) {
    if (tau_s <= 0.0) return command;
    const double a = std::exp(-dt / tau_s);
    return command + (applied - command) * a;
}

}  // namespace dhn

#endif  // DHN_CONTROL_HPP
