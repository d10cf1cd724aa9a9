#ifndef DHN_THERMAL_HPP
#define DHN_THERMAL_HPP

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <vector>

#include "dhn/hydraulics.hpp"
#include "dhn/model.hpp"

namespace dhn {

/**
 * @brief Index map from model elements into the flat temperature state
 *        vector.
 *
 * Order: pipe sub-volumes (model segment order, upstream first), exchanger
 * volumes, the optional buffer vessel, then the thermal masses.  Every pipe
 * segment is split into `subsegments` equal well-mixed volumes; one volume
 * per segment recovers the fully lumped formulation.
 */
struct VolumeLayout {
    int subsegments = 1;
    std::vector<std::size_t> segment_offset;  ///< first sub-volume per segment
    std::vector<std::size_t> hx_offset;       ///< one volume per exchanger
    std::size_t buffer_offset = npos;         ///< buffer volume, npos if absent
    std::vector<std::size_t> mass_offset;     ///< one state per thermal mass
    std::vector<std::size_t> hx_mass;         ///< per exchanger: index of its mass
    std::size_t size = 0;                     ///< total state length

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    bool has_buffer() const { return buffer_offset != npos; }
};

inline VolumeLayout build_volume_layout(const NetworkModel& m, int subsegments) {
    if (subsegments < 1) throw std::invalid_argument("subsegments must be at least 1");
    VolumeLayout lay;
    lay.subsegments = subsegments;
    std::size_t off = 0;
    lay.segment_offset.reserve(m.segments.size());
    for (std::size_t i = 0; i < m.segments.size(); ++i) {
        lay.segment_offset.push_back(off);
        off += static_cast<std::size_t>(subsegments);
    }
    lay.hx_offset.reserve(m.heat_exchangers.size());
    for (std::size_t i = 0; i < m.heat_exchangers.size(); ++i) {
        lay.hx_offset.push_back(off);
        ++off;
    }
    if (m.plant.buffer_volume_m3 > 0.0) {
        lay.buffer_offset = off;
        ++off;
    }
    lay.mass_offset.reserve(m.thermal_masses.size());
    for (std::size_t i = 0; i < m.thermal_masses.size(); ++i) {
        lay.mass_offset.push_back(off);
        ++off;
    }
    lay.size = off;
    lay.hx_mass.reserve(m.heat_exchangers.size());
    for (const auto& hx : m.heat_exchangers) {
        std::size_t mi = VolumeLayout::npos;
        for (std::size_t k = 0; k < m.thermal_masses.size(); ++k)
            if (m.thermal_masses[k].id == hx.thermal_mass) mi = k;
        if (mi == VolumeLayout::npos)
            throw std::invalid_argument("exchanger '" + hx.id + "' references unknown mass");
        lay.hx_mass.push_back(mi);
    }
    return lay;
}

/**
 * @brief Where a volume draws its inlet water from.
 *
 * `parts` lists (state index, mass-flow weight) pairs; an index of npos
 * stands for the plant supply source.  Weights sum to 1 when flow passes;
 * an empty list means the volume sees no advection at all.
 */
struct StreamSource {
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::vector<std::pair<std::size_t, double>> parts;
};

/**
 * @brief Flow-dependent advection wiring, rebuilt whenever valves move.
 */
struct AdvectionPlan {
    std::vector<double> volume_mdot;   ///< advected flow per water volume [kg/s]
    std::vector<StreamSource> inlet;   ///< inlet source per water volume
    StreamSource return_probe;         ///< stream arriving at the plant (T_r)
};

namespace detail {

inline double eval_stream(const StreamSource& src, const std::vector<double>& T,
                          double supply_temp) {
    if (src.parts.empty()) return supply_temp;  // unused when flow is zero
    double acc = 0.0;
    for (const auto& [idx, w] : src.parts)
        acc += w * (idx == StreamSource::npos ? supply_temp : T[idx]);
    return acc;
}

}  // namespace detail

/**
 * @brief Build the advection wiring for one flow state.
 */
inline AdvectionPlan build_advection_plan(const NetworkModel& /*m*/, const NetworkTopology& topo,
                                          const VolumeLayout& lay, const FlowState& flows) {
    AdvectionPlan plan;
    plan.volume_mdot.assign(lay.size, 0.0);
    plan.inlet.assign(lay.size, StreamSource{});

    // Chains a run of segments onto the current stream head and returns the
    // new head.  A head with empty parts only occurs before the supply source
    // is attached, which cannot happen here.
    auto wire_chain = [&](const std::vector<std::size_t>& segs, StreamSource head,
                          double mdot) -> StreamSource {
        for (std::size_t s : segs) {
            std::size_t off = lay.segment_offset[s];
            for (int k = 0; k < lay.subsegments; ++k) {
                plan.volume_mdot[off + k] = mdot;
                if (mdot > 0.0) plan.inlet[off + k] = head;
                head = StreamSource{{{off + k, 1.0}}};
            }
        }
        return head;
    };

    const StreamSource supply{{{StreamSource::npos, 1.0}}};
    StreamSource head = wire_chain(topo.supply_main, supply, flows.mdot_total_kgps);

    std::vector<StreamSource> loop_out(topo.loops.size());
    for (std::size_t li = 0; li < topo.loops.size(); ++li) {
        const LoopTopology& loop = topo.loops[li];
        const double ml = flows.loop_kgps[li];
        const double mu = flows.user_kgps[li];
        const double mb = flows.bypass_kgps[li];
        StreamSource leg = wire_chain(loop.supply_leg, head, ml);

        StreamSource user = wire_chain(loop.user_before, leg, mu);
        const std::size_t hx = lay.hx_offset[loop.exchanger];
        plan.volume_mdot[hx] = mu;
        if (mu > 0.0) plan.inlet[hx] = user;
        user = StreamSource{{{hx, 1.0}}};
        user = wire_chain(loop.user_after, user, mu);

        StreamSource byp = wire_chain(loop.bypass, leg, mb);

        StreamSource merged;
        if (ml > 0.0) {
            if (mu > 0.0)
                for (const auto& [idx, w] : user.parts) merged.parts.emplace_back(idx, w * mu / ml);
            if (mb > 0.0)
                for (const auto& [idx, w] : byp.parts) merged.parts.emplace_back(idx, w * mb / ml);
        }
        loop_out[li] = wire_chain(loop.return_leg, merged, ml);
    }

    StreamSource joined;
    if (flows.mdot_total_kgps > 0.0) {
        for (std::size_t li = 0; li < topo.loops.size(); ++li) {
            const double frac = flows.loop_kgps[li] / flows.mdot_total_kgps;
            if (frac <= 0.0) continue;
            for (const auto& [idx, w] : loop_out[li].parts)
                joined.parts.emplace_back(idx, w * frac);
        }
    }
    StreamSource at_plant = wire_chain(topo.return_main, joined, flows.mdot_total_kgps);
    plan.return_probe = at_plant;

    if (lay.has_buffer()) {
        plan.volume_mdot[lay.buffer_offset] = flows.mdot_total_kgps;
        if (flows.mdot_total_kgps > 0.0) plan.inlet[lay.buffer_offset] = at_plant;
    }
    return plan;
}

/**
 * @brief Exogenous inputs held constant across one integrator step.
 */
struct ThermalInputs {
    std::vector<double> peltier_W;  ///< acting sink power per thermal mass [W], may be empty
};

/**
 * @brief Time derivative of the temperature state.
 *
 * Pipe volumes exchange with the shared ambient, exchanger volumes with
 * their thermal mass, the buffer with ambient; each thermal mass balances
 * exchanger input against the acting ambient loss and the commanded sink.
 */
inline void thermal_rhs(const NetworkModel& m, const VolumeLayout& lay,
                        const AdvectionPlan& plan, const std::vector<double>& T, double t,
                        double supply_temp, double ambient, const ThermalInputs& in,
                        std::vector<double>& dT) {
    (void)t;
    const double rho = m.fluid.rho;
    const double cp = m.fluid.cp;
    dT.assign(lay.size, 0.0);

    for (std::size_t s = 0; s < m.segments.size(); ++s) {
        const PipeSegment& seg = m.segments[s];
        const double vsub = seg.volume_m3() / lay.subsegments;
        const double hsub = seg.hAs_WpK / lay.subsegments;
        const double rcv = rho * cp * vsub;
        for (int k = 0; k < lay.subsegments; ++k) {
            const std::size_t i = lay.segment_offset[s] + k;
            const double mdot = plan.volume_mdot[i];
            double d = -hsub * (T[i] - ambient) / rcv;
            if (mdot > 0.0) {
                const double tin = detail::eval_stream(plan.inlet[i], T, supply_temp);
                d += mdot * (tin - T[i]) / (rho * vsub);
            }
            dT[i] = d;
        }
    }
    for (std::size_t h = 0; h < m.heat_exchangers.size(); ++h) {
        const HeatExchanger& hx = m.heat_exchangers[h];
        const std::size_t i = lay.hx_offset[h];
        const std::size_t im = lay.mass_offset[lay.hx_mass[h]];
        const double rcv = rho * cp * hx.volume_m3;
        double d = -hx.hAs_WpK * (T[i] - T[im]) / rcv;
        const double mdot = plan.volume_mdot[i];
        if (mdot > 0.0) {
            const double tin = detail::eval_stream(plan.inlet[i], T, supply_temp);
            d += mdot * (tin - T[i]) / (rho * hx.volume_m3);
        }
        dT[i] = d;
    }
    if (lay.has_buffer()) {
        const std::size_t i = lay.buffer_offset;
        const double rcv = rho * cp * m.plant.buffer_volume_m3;
        double d = -m.plant.buffer_hAs_WpK * (T[i] - ambient) / rcv;
        const double mdot = plan.volume_mdot[i];
        if (mdot > 0.0) {
            const double tin = detail::eval_stream(plan.inlet[i], T, supply_temp);
            d += mdot * (tin - T[i]) / (rho * m.plant.buffer_volume_m3);
        }
        dT[i] = d;
    }
    for (std::size_t k = 0; k < m.thermal_masses.size(); ++k) {
        const ThermalMass& tm = m.thermal_masses[k];
        const std::size_t i = lay.mass_offset[k];
        double q = 0.0;
        for (std::size_t h = 0; h < m.heat_exchangers.size(); ++h)
            if (lay.hx_mass[h] == k)
                q += m.heat_exchangers[h].hAs_WpK * (T[lay.hx_offset[h]] - T[i]);
        q -= tm.hAs_act_WpK * (T[i] - ambient);
        if (!in.peltier_W.empty()) q -= in.peltier_W[k];
        dT[i] = q / tm.C_JpK;
    }
}

/**
 * @brief One classical fourth-order Runge-Kutta step of length @p h.
 *
 * @p supply and @p ambient are evaluated at the stage times; flows and sink
 * commands stay frozen, matching the quasi-static hydraulic assumption.
 */
template <class SupplyFn, class AmbientFn>
inline void rk4_step(const NetworkModel& m, const VolumeLayout& lay, const AdvectionPlan& plan,
                     std::vector<double>& T, double t, double h, SupplyFn&& supply,
                     AmbientFn&& ambient, const ThermalInputs& in) {
    static thread_local std::vector<double> k1, k2, k3, k4, tmp;
    thermal_rhs(m, lay, plan, T, t, supply(t), ambient(t), in, k1);
    tmp.resize(T.size());
    for (std::size_t i = 0; i < T.size(); ++i) tmp[i] = T[i] + 0.5 * h * k1[i];
    thermal_rhs(m, lay, plan, tmp, t + 0.5 * h, supply(t + 0.5 * h), ambient(t + 0.5 * h), in, k2);
    for (std::size_t i = 0; i < T.size(); ++i) tmp[i] = T[i] + 0.5 * h * k2[i];
    thermal_rhs(m, lay, plan, tmp, t + 0.5 * h, supply(t + 0.5 * h), ambient(t + 0.5 * h), in, k3);
    for (std::size_t i = 0; i < T.size(); ++i) tmp[i] = T[i] + h * k3[i];
    thermal_rhs(m, lay, plan, tmp, t + h, supply(t + h), ambient(t + h), in, k4);
    for (std::size_t i = 0; i < T.size(); ++i)
        T[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

/**
 * @brief Smallest thermal time constant over all volumes, with the advection
 *        term bounded by the full plant flow (the worst any volume can see).
 */
inline double min_time_constant(const NetworkModel& m, const VolumeLayout& lay) {
    const double rho = m.fluid.rho;
    const double cp = m.fluid.cp;
    const double mdot = m.plant.mdot_kgps;
    double tau = std::numeric_limits<double>::infinity();
    for (const auto& seg : m.segments) {
        const double vsub = seg.volume_m3() / lay.subsegments;
        const double hsub = seg.hAs_WpK / lay.subsegments;
        tau = std::min(tau, rho * cp * vsub / (mdot * cp + hsub));
    }
    for (const auto& hx : m.heat_exchangers)
        tau = std::min(tau, rho * cp * hx.volume_m3 / (mdot * cp + hx.hAs_WpK));
    if (m.plant.buffer_volume_m3 > 0.0)
        tau = std::min(tau, rho * cp * m.plant.buffer_volume_m3 /
                                (mdot * cp + m.plant.buffer_hAs_WpK));
    for (const auto& tm : m.thermal_masses) {
        double h = tm.hAs_act_WpK;
        for (const auto& hx : m.heat_exchangers)
            if (hx.thermal_mass == tm.id) h += hx.hAs_WpK;
        if (h > 0.0) tau = std::min(tau, tm.C_JpK / h);
    }
    return tau;
}

/// Default integrator step: a tenth of the fastest time constant.
inline double auto_time_step(const NetworkModel& m, const VolumeLayout& lay) {
    return 0.1 * min_time_constant(m, lay);
}

/**
 * @brief Reject steps that violate the explicit-integration stability margin.
 *
 * @throws numeric_error naming the offending step and a workable one.
 */
inline void check_time_step(const NetworkModel& m, const VolumeLayout& lay, double dt) {
    const double tau = min_time_constant(m, lay);
    if (dt > 0.5 * tau + kTimeEps) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "time step %.6g s exceeds the stability bound 0.5*tau_min = %.6g s; "
                      "use dt <= %.6g s",
                      dt, 0.5 * tau, auto_time_step(m, lay));
        throw numeric_error(buf);
    }
}

/**
 * @brief Algebraic steady state at fixed flows and inputs.
 *
 * Thermal masses are pinned to @p mass_temps (not relaxed): the plant is
 * normally started with consumers pre-conditioned to their setpoint, far
 * from the ambient equilibrium they would otherwise drift to.
 */
inline std::vector<double> steady_state(const NetworkModel& m, const NetworkTopology& topo,
                                        const VolumeLayout& lay, const AdvectionPlan& plan,
                                        double supply_temp, double ambient,
                                        const std::vector<double>& mass_temps) {
    if (mass_temps.size() != m.thermal_masses.size())
        throw std::invalid_argument("need one pinned temperature per thermal mass");
    std::vector<double> T(lay.size, ambient);
    for (std::size_t k = 0; k < m.thermal_masses.size(); ++k)
        T[lay.mass_offset[k]] = mass_temps[k];

    const double cp = m.fluid.cp;
    // One well-mixed volume in steady state: mdot*cp*(Tin - T) = hAs*(T - Tref).
    auto steady_T = [&](double mdot, double tin, double hAs, double tref) {
        const double denom = mdot * cp + hAs;
        if (denom <= 0.0) return tref;
        return (mdot * cp * tin + hAs * tref) / denom;
    };

    auto solve_chain = [&](const std::vector<std::size_t>& segs) {
        for (std::size_t s : segs) {
            const PipeSegment& seg = m.segments[s];
            const double hsub = seg.hAs_WpK / lay.subsegments;
            for (int k = 0; k < lay.subsegments; ++k) {
                const std::size_t i = lay.segment_offset[s] + k;
                const double mdot = plan.volume_mdot[i];
                const double tin = detail::eval_stream(plan.inlet[i], T, supply_temp);
                T[i] = mdot > 0.0 ? steady_T(mdot, tin, hsub, ambient) : ambient;
            }
        }
    };

    solve_chain(topo.supply_main);
    for (const LoopTopology& loop : topo.loops) {
        solve_chain(loop.supply_leg);
        solve_chain(loop.user_before);
        const std::size_t hi = lay.hx_offset[loop.exchanger];
        const HeatExchanger& hx = m.heat_exchangers[loop.exchanger];
        const std::size_t mi = lay.mass_offset[lay.hx_mass[loop.exchanger]];
        const double mdot = plan.volume_mdot[hi];
        const double tin = detail::eval_stream(plan.inlet[hi], T, supply_temp);
        T[hi] = mdot > 0.0 ? steady_T(mdot, tin, hx.hAs_WpK, T[mi]) : T[mi];
        solve_chain(loop.user_after);
        solve_chain(loop.bypass);
        solve_chain(loop.return_leg);
    }
    solve_chain(topo.return_main);
    if (lay.has_buffer()) {
        const std::size_t i = lay.buffer_offset;
        const double mdot = plan.volume_mdot[i];
        const double tin = detail::eval_stream(plan.inlet[i], T, supply_temp);
        T[i] = mdot > 0.0 ? steady_T(mdot, tin, m.plant.buffer_hAs_WpK, ambient) : ambient;
    }
    return T;
}

}  // namespace dhn

#endif  // DHN_THERMAL_HPP
