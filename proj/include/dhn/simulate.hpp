#ifndef DHN_SIMULATE_HPP
#define DHN_SIMULATE_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dhn/control.hpp"
#include "dhn/core.hpp"
#include "dhn/hydraulics.hpp"
#include "dhn/model.hpp"
#include "dhn/thermal.hpp"
#include "dhn/trajectory.hpp"

namespace dhn {

namespace detail {

/// Where a valve gets its opening from during a run.
enum class ValveDrive { scheduled, controlled, fixed };

struct ValveWiring {
    ValveDrive drive = ValveDrive::fixed;
    const PiecewiseLinear* schedule = nullptr;  ///< when scheduled
    std::size_t mass = 0;                       ///< controlling mass, when controlled
};

struct ControllerRuntime {
    bool present = false;
    PidConfig cfg;
    PidState state;
    std::size_t valve = 0;        ///< model valve index the output drives
    bool drives_valve = false;    ///< false when a schedule overrides it
    double period_s = 0.0;
    double next_fire_s = 0.0;
    double last_fire_s = 0.0;
};

struct SinkRuntime {
    bool enabled = false;
    double command_W = 0.0;
    double applied_W = 0.0;
    double period_s = 0.0;
    double next_fire_s = 0.0;
};

inline std::string fmt_time(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace detail

/**
 * @brief Run one closed-loop experiment and return the sampled trajectory.
 *
 * Semantics, in order of precedence:
 *  - a valve with an entry in `scenario.valve_schedules` follows that profile
 *    and ignores any controller;
 *  - otherwise, if the thermal mass served by the valve's loop has controller
 *    settings (its own or the "" defaults), a PID drives the valve toward the
 *    active occupancy setpoint;
 *  - otherwise the valve is parked half open.
 *
 * Controllers fire on their own sample grid (period = sample_time_s, or one
 * output interval when zero), taking the actually elapsed time as PID step;
 * flows are re-solved whenever any opening changes.  An active sink attached
 * to a mass is commanded on the same grid from the ambient-emulation law and
 * tracks through its first-order actuator model within each integrator step.
 *
 * The trajectory carries one row per output interval plus the initial state,
 * and a final row at `duration_s` when the duration is not a multiple of the
 * output interval.
 */
inline Trajectory simulate(const NetworkModel& m, const ExperimentScenario& sc) {
    {
        ValidationReport r = validate_network(m);
        if (!r.ok()) throw validation_error("invalid network:\n" + r.to_string());
        ValidationReport s = validate_scenario(sc, m);
        if (!s.ok()) throw validation_error("invalid scenario:\n" + s.to_string());
    }
    const NetworkTopology topo = analyze_topology(m);
    const VolumeLayout lay = build_volume_layout(m, sc.subsegments);

    const double dt_base = sc.dt_s > 0.0 ? sc.dt_s : auto_time_step(m, lay);
    check_time_step(m, lay, dt_base);
    const double out = sc.output_interval_s;

    const PiecewiseLinear supply =
        sc.supply_temp_C.empty() ? PiecewiseLinear(m.plant.supply_temp_C) : sc.supply_temp_C;
    const PiecewiseLinear& ambient = sc.ambient_C;

    // --- wire valves to their drives -------------------------------------
    std::vector<detail::ValveWiring> wiring(m.valves.size());
    std::vector<detail::ControllerRuntime> ctrl(m.thermal_masses.size());
    std::vector<detail::SinkRuntime> sink(m.thermal_masses.size());
    std::vector<std::size_t> mass_valve(m.thermal_masses.size(), static_cast<std::size_t>(-1));

    const auto def_ctrl = sc.controllers.find("");
    for (const LoopTopology& loop : topo.loops) {
        const std::size_t mi = lay.hx_mass[loop.exchanger];
        mass_valve[mi] = loop.valve;
        const std::string& vid = m.valves[loop.valve].id;
        const std::string& mid = m.thermal_masses[mi].id;

        auto cit = sc.controllers.find(mid);
        if (cit == sc.controllers.end()) cit = def_ctrl;
        if (cit != sc.controllers.end()) {
            ctrl[mi].present = true;
            ctrl[mi].cfg = cit->second;
            ctrl[mi].period_s = cit->second.sample_time_s > 0.0 ? cit->second.sample_time_s : out;
            ctrl[mi].valve = loop.valve;
        }

        auto sit = sc.valve_schedules.find(vid);
        if (sit != sc.valve_schedules.end()) {
            wiring[loop.valve] = {detail::ValveDrive::scheduled, &sit->second, mi};
        } else if (ctrl[mi].present) {
            wiring[loop.valve] = {detail::ValveDrive::controlled, nullptr, mi};
            ctrl[mi].drives_valve = true;
        }  // else: fixed at 0.5

        const ThermalMass& tm = m.thermal_masses[mi];
        if (tm.peltier && !sc.emulate_ambient_full_C.empty()) {
            sink[mi].enabled = true;
            sink[mi].period_s = ctrl[mi].present ? ctrl[mi].period_s : out;
        }
    }

    // --- initial state ----------------------------------------------------
    std::vector<double> mass_T(m.thermal_masses.size());
    for (std::size_t k = 0; k < m.thermal_masses.size(); ++k)
        mass_T[k] = sc.init == InitMode::steady ? m.thermal_masses[k].setpoint_C : ambient(0.0);

    std::vector<double> u(m.valves.size(), 0.5);
    for (std::size_t v = 0; v < m.valves.size(); ++v) {
        switch (wiring[v].drive) {
            case detail::ValveDrive::scheduled:
                u[v] = clamp((*wiring[v].schedule)(0.0), 0.0, 1.0);
                break;
            case detail::ValveDrive::controlled: {
                const std::size_t mi = wiring[v].mass;
                const double sp = active_setpoint(sc, m.thermal_masses[mi].id, 0.0);
                u[v] = pid_init(ctrl[mi].cfg, ctrl[mi].state, sp, mass_T[mi]);
                ctrl[mi].next_fire_s = ctrl[mi].period_s;
                ctrl[mi].last_fire_s = 0.0;
                break;
            }
            case detail::ValveDrive::fixed: u[v] = 0.5; break;
        }
    }
    // Controllers that exist but do not drive a valve still keep a grid (their
    // mass may carry a sink commanded on the same cadence).
    for (auto& c : ctrl)
        if (c.present && !c.drives_valve) c.next_fire_s = c.period_s;

    FlowState flows = solve_flows(m, topo, u);
    AdvectionPlan plan = build_advection_plan(m, topo, lay, flows);

    std::vector<double> T;
    if (sc.init == InitMode::steady) {
        T = steady_state(m, topo, lay, plan, supply(0.0), ambient(0.0), mass_T);
    } else {
        T.assign(lay.size, ambient(0.0));
        for (std::size_t k = 0; k < m.thermal_masses.size(); ++k)
            T[lay.mass_offset[k]] = mass_T[k];
    }

    ThermalInputs inputs;
    inputs.peltier_W.assign(m.thermal_masses.size(), 0.0);
    for (std::size_t k = 0; k < m.thermal_masses.size(); ++k) {
        if (!sink[k].enabled) continue;
        const ThermalMass& tm = m.thermal_masses[k];
        sink[k].command_W =
            peltier_command(tm.hAs_act_WpK, ambient(0.0), tm.setpoint_C,
                            sc.emulate_ambient_full_C(0.0), sc.emulate_setpoint_full_C,
                            sc.emulate_k_T, tm.peltier->max_power_W);
        sink[k].applied_W = sink[k].command_W;  // actuator starts settled
        sink[k].next_fire_s = sink[k].period_s;
        inputs.peltier_W[k] = sink[k].applied_W;
    }

    // --- trajectory schema -------------------------------------------------
    Trajectory traj;
    {
        std::vector<std::string> cols = {"t_s",       "supply_C",        "return_C",
                                         "ambient_C", "q_tot_W",         "q_pipe_loss_W",
                                         "q_heater_loss_W", "e_store_J"};
        for (const auto& tm : m.thermal_masses) {
            cols.push_back("thm_" + tm.id + "_C");
            cols.push_back("q_in_" + tm.id + "_W");
            cols.push_back("q_out_" + tm.id + "_W");
            cols.push_back("q_pelt_" + tm.id + "_W");
            cols.push_back("setpoint_" + tm.id + "_C");
        }
        for (const auto& hx : m.heat_exchangers) {
            cols.push_back("hx_" + hx.id + "_in_C");
            cols.push_back("hx_" + hx.id + "_out_C");
            cols.push_back("mdot_hx_" + hx.id + "_kgps");
            cols.push_back("dp_hx_" + hx.id + "_Pa");
        }
        for (const auto& v : m.valves) {
            cols.push_back("valve_" + v.id + "_u");
            cols.push_back("dp_valve_user_" + v.id + "_Pa");
            cols.push_back("dp_valve_bypass_" + v.id + "_Pa");
        }
        for (const auto& s : m.segments) {
            cols.push_back("seg_" + s.id + "_in_C");
            cols.push_back("seg_" + s.id + "_out_C");
            cols.push_back("mdot_seg_" + s.id + "_kgps");
            cols.push_back("dp_seg_" + s.id + "_Pa");
        }
        traj.set_columns(std::move(cols));
        traj.meta["model"] = m.name;
        traj.meta["duration_s"] = detail::fmt_time(sc.duration_s);
        traj.meta["output_interval_s"] = detail::fmt_time(out);
        traj.meta["dt_s"] = detail::fmt_time(dt_base);
        traj.meta["subsegments"] = std::to_string(sc.subsegments);
        traj.meta["init"] = sc.init == InitMode::steady ? "steady" : "ambient";
        traj.meta["seed"] = std::to_string(sc.seed);
    }

    auto record = [&](double t) {
        std::vector<double> row;
        row.reserve(traj.columns().size());
        const double ts = supply(t);
        const double ta = ambient(t);
        const double tr = detail::eval_stream(plan.return_probe, T, ts);
        row.push_back(t);
        row.push_back(ts);
        row.push_back(tr);
        row.push_back(ta);
        row.push_back(m.plant.mdot_kgps * m.fluid.cp * (ts - tr));
        double pipe_loss = 0.0, e_store = 0.0;
        for (std::size_t s = 0; s < m.segments.size(); ++s) {
            const double hsub = m.segments[s].hAs_WpK / lay.subsegments;
            const double vsub = m.segments[s].volume_m3() / lay.subsegments;
            for (int k = 0; k < lay.subsegments; ++k) {
                const double tv = T[lay.segment_offset[s] + k];
                pipe_loss += hsub * (tv - ta);
                e_store += m.fluid.rho * m.fluid.cp * vsub * tv;
            }
        }
        row.push_back(pipe_loss);
        row.push_back(lay.has_buffer()
                          ? m.plant.buffer_hAs_WpK * (T[lay.buffer_offset] - ta)
                          : 0.0);
        row.push_back(e_store);
        for (std::size_t k = 0; k < m.thermal_masses.size(); ++k) {
            const ThermalMass& tm = m.thermal_masses[k];
            const double tmass = T[lay.mass_offset[k]];
            double q_in = 0.0;
            for (std::size_t h = 0; h < m.heat_exchangers.size(); ++h)
                if (lay.hx_mass[h] == k)
                    q_in += m.heat_exchangers[h].hAs_WpK * (T[lay.hx_offset[h]] - tmass);
            const double q_pelt = inputs.peltier_W[k];
            row.push_back(tmass);
            row.push_back(q_in);
            row.push_back(tm.hAs_act_WpK * (tmass - ta) + q_pelt);
            row.push_back(q_pelt);
            row.push_back(active_setpoint(sc, tm.id, t));
        }
        for (std::size_t h = 0; h < m.heat_exchangers.size(); ++h) {
            const std::size_t i = lay.hx_offset[h];
            const double tin = plan.volume_mdot[i] > 0.0
                                   ? detail::eval_stream(plan.inlet[i], T, ts)
                                   : T[i];
            row.push_back(tin);
            row.push_back(T[i]);
            row.push_back(flows.hx_mdot[h]);
            row.push_back(flows.hx_dp[h]);
        }
        for (std::size_t v = 0; v < m.valves.size(); ++v) {
            row.push_back(u[v]);
            row.push_back(flows.valve_user_dp[v]);
            row.push_back(flows.valve_bypass_dp[v]);
        }
        for (std::size_t s = 0; s < m.segments.size(); ++s) {
            const std::size_t first = lay.segment_offset[s];
            const std::size_t last = first + lay.subsegments - 1;
            const double tin = plan.volume_mdot[first] > 0.0
                                   ? detail::eval_stream(plan.inlet[first], T, ts)
                                   : T[first];
            row.push_back(tin);
            row.push_back(T[last]);
            row.push_back(flows.segment_mdot[s]);
            row.push_back(flows.segment_dp[s]);
        }
        traj.add_row(row);
    };

    record(0.0);

    // --- main loop ----------------------------------------------------------
    auto supply_fn = [&](double t) { return supply(t); };
    auto ambient_fn = [&](double t) { return ambient(t); };

    double t = 0.0;
    while (t < sc.duration_s - kTimeEps) {
        const double t_row = std::min(t + out, sc.duration_s);
        const double span = t_row - t;
        const int nsteps = std::max(1, static_cast<int>(std::ceil(span / dt_base - 1e-12)));
        const double h = span / nsteps;
        for (int step = 0; step < nsteps; ++step) {
            bool dirty = false;
            // Scheduled valves follow their profile continuously.
            for (std::size_t v = 0; v < m.valves.size(); ++v) {
                if (wiring[v].drive != detail::ValveDrive::scheduled) continue;
                const double nu = clamp((*wiring[v].schedule)(t), 0.0, 1.0);
                if (nu != u[v]) {
                    u[v] = nu;
                    dirty = true;
                }
            }
            // Controllers fire on their own grids.
            for (std::size_t k = 0; k < m.thermal_masses.size(); ++k) {
                detail::ControllerRuntime& c = ctrl[k];
                if (!c.present || t + kTimeEps < c.next_fire_s) continue;
                const double elapsed = t - c.last_fire_s;
                if (elapsed > kTimeEps) {
                    const double sp = active_setpoint(sc, m.thermal_masses[k].id, t);
                    const double nu =
                        pid_step(c.cfg, c.state, sp, T[lay.mass_offset[k]], elapsed);
                    c.last_fire_s = t;
                    if (c.drives_valve && nu != u[c.valve]) {
                        u[c.valve] = nu;
                        dirty = true;
                    }
                }
                while (c.next_fire_s <= t + kTimeEps) c.next_fire_s += c.period_s;
            }
            // Sink commands refresh on the same cadence.
            for (std::size_t k = 0; k < m.thermal_masses.size(); ++k) {
                detail::SinkRuntime& s = sink[k];
                if (!s.enabled || t + kTimeEps < s.next_fire_s) continue;
                const ThermalMass& tm = m.thermal_masses[k];
                s.command_W = peltier_command(tm.hAs_act_WpK, ambient(t), tm.setpoint_C,
                                              sc.emulate_ambient_full_C(t),
                                              sc.emulate_setpoint_full_C, sc.emulate_k_T,
                                              tm.peltier->max_power_W);
                while (s.next_fire_s <= t + kTimeEps) s.next_fire_s += s.period_s;
            }
            if (dirty) {
                flows = solve_flows(m, topo, u);
                plan = build_advection_plan(m, topo, lay, flows);
            }
            // Actuator tracking: applied power held constant across the step.
            for (std::size_t k = 0; k < m.thermal_masses.size(); ++k) {
                if (!sink[k].enabled) continue;
                sink[k].applied_W = track_first_order(sink[k].applied_W, sink[k].command_W,
                                                      m.thermal_masses[k].peltier->tracking_tau_s,
                                                      h);
                inputs.peltier_W[k] = sink[k].applied_W;
            }
            rk4_step(m, lay, plan, T, t, h, supply_fn, ambient_fn, inputs);
            t += h;
        }
        t = t_row;  // absorb accumulated round-off at the row boundary
        record(t);
    }
    return traj;
}

/**
 * @brief Result of a relay (astable feedback) tuning experiment.
 */
struct AutotuneResult {
    double ku = 0.0;           ///< ultimate gain [1/K]
    double pu_s = 0.0;         ///< ultimate period [s]
    double amplitude_K = 0.0;  ///< half peak-to-peak of the limit cycle [K]
    int cycles = 0;            ///< full cycles observed
    PidConfig pid;             ///< Ziegler-Nichols PID derived from (ku, pu)
};

/**
 * @brief Relay tuning of one consumer loop.
 *
 * The valve of the loop serving @p mass_id toggles between @p u_low and
 * @p u_high around the mass setpoint while every other valve is parked half
 * open; supply and ambient are held at their scenario values at t = 0.  The
 * relay carries a hysteresis band of @p hysteresis_K kelvin so the opening
 * cannot chatter at the sampling rate.  Once the limit cycle repeats
 * (consecutive periods within 2 %, amplitudes within 5 %), the ultimate
 * point follows from the describing function of the hysteretic relay,
 * ku = 4h / (pi * sqrt(a^2 - eps^2)), and classic Ziegler-Nichols tuning
 * maps it to the returned PID (kp = 0.6 ku, Ti = 0.5 pu, Td = 0.125 pu).
 *
 * @throws numeric_error when no stable limit cycle appears within
 *         @p max_time_s.
 */
inline AutotuneResult relay_autotune(const NetworkModel& m, const ExperimentScenario& sc,
                                     const std::string& mass_id, double u_low, double u_high,
                                     double max_time_s, double hysteresis_K = 0.1) {
    if (!(u_high > u_low)) throw validation_error("relay needs u_high > u_low");
    if (!(hysteresis_K > 0.0)) throw validation_error("relay hysteresis must be positive");
    const NetworkTopology topo = analyze_topology(m);
    const VolumeLayout lay = build_volume_layout(m, sc.subsegments);
    const double dt = sc.dt_s > 0.0 ? sc.dt_s : auto_time_step(m, lay);
    check_time_step(m, lay, dt);

    std::size_t mass = static_cast<std::size_t>(-1), valve = 0;
    for (const LoopTopology& loop : topo.loops) {
        const std::size_t mi = lay.hx_mass[loop.exchanger];
        if (m.thermal_masses[mi].id == mass_id) {
            mass = mi;
            valve = loop.valve;
        }
    }
    if (mass == static_cast<std::size_t>(-1))
        throw validation_error("no loop serves thermal mass '" + mass_id + "'");
    const double setpoint = m.thermal_masses[mass].setpoint_C;

    const double ts = sc.supply_temp_C.empty() ? m.plant.supply_temp_C : sc.supply_temp_C(0.0);
    const double ta = sc.ambient_C(0.0);

    // Only two openings ever occur: precompute both hydraulic states.
    std::vector<double> u(m.valves.size(), 0.5);
    u[valve] = clamp(u_low, 0.0, 1.0);
    const FlowState flow_lo = solve_flows(m, topo, u);
    const AdvectionPlan plan_lo = build_advection_plan(m, topo, lay, flow_lo);
    u[valve] = clamp(u_high, 0.0, 1.0);
    const FlowState flow_hi = solve_flows(m, topo, u);
    const AdvectionPlan plan_hi = build_advection_plan(m, topo, lay, flow_hi);

    std::vector<double> mass_T;
    for (const auto& tm : m.thermal_masses) mass_T.push_back(tm.setpoint_C);
    std::vector<double> T = steady_state(m, topo, lay, plan_hi, ts, ta, mass_T);

    auto sfn = [&](double) { return ts; };
    auto afn = [&](double) { return ta; };
    const ThermalInputs no_sink;

    const double eps = hysteresis_K;
    bool high = T[lay.mass_offset[mass]] <= setpoint;
    double cycle_min = T[lay.mass_offset[mass]], cycle_max = cycle_min;
    double last_switch_lo = -1.0, last_period = 0.0, last_amp = 0.0;
    int cycles = 0;
    AutotuneResult res;

    const long nmax = static_cast<long>(std::ceil(max_time_s / dt));
    for (long i = 0; i < nmax; ++i) {
        const double t = i * dt;
        const double tm_now = T[lay.mass_offset[mass]];
        cycle_min = std::min(cycle_min, tm_now);
        cycle_max = std::max(cycle_max, tm_now);
        if (!high && tm_now < setpoint - eps) {
            high = true;
        } else if (high && tm_now > setpoint + eps) {
            high = false;  // one switch-to-low per cycle: the period marker
            if (last_switch_lo >= 0.0) {
                const double period = t - last_switch_lo;
                const double amp = 0.5 * (cycle_max - cycle_min);
                ++cycles;
                if (cycles >= 2 && last_period > 0.0 &&
                    rel_diff(period, last_period) < 0.02 && last_amp > 0.0 &&
                    rel_diff(amp, last_amp) < 0.05 && amp > eps * 1.0001) {
                    const double hrelay = 0.5 * (u_high - u_low);
                    res.ku = 4.0 * hrelay / (kPi * std::sqrt(amp * amp - eps * eps));
                    res.pu_s = period;
                    res.amplitude_K = amp;
                    res.cycles = cycles;
                    res.pid.kp = 0.6 * res.ku;
                    res.pid.ki = res.pid.kp / (0.5 * res.pu_s);
                    res.pid.kd = res.pid.kp * 0.125 * res.pu_s;
                    res.pid.u_min = 0.0;
                    res.pid.u_max = 1.0;
                    return res;
                }
                last_period = period;
                last_amp = amp;
            }
            last_switch_lo = t;
            cycle_min = cycle_max = tm_now;
        }
        rk4_step(m, lay, high ? plan_hi : plan_lo, T, t, dt, sfn, afn, no_sink);
    }
    throw numeric_error("relay tuning found no stable limit cycle within the allotted time");
}

}  // namespace dhn

#endif  // DHN_SIMULATE_HPP
