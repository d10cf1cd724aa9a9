#ifndef DHN_HYDRAULICS_HPP
#define DHN_HYDRAULICS_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "dhn/model.hpp"

namespace dhn {

/**
 * @brief Quasi-static flow distribution at one operating point.
 *
 * All flows are non-negative; pressure drops follow dp = k * (mdot/A_c)^2
 * per element.  Vectors are indexed like the corresponding NetworkModel
 * containers, so trajectory writers can zip them directly.
 */
struct FlowState {
    double mdot_total_kgps = 0.0;       ///< imposed plant flow [kg/s]
    std::vector<double> loop_kgps;      ///< per topology loop [kg/s]
    std::vector<double> user_kgps;      ///< per loop, user branch [kg/s]
    std::vector<double> bypass_kgps;    ///< per loop, bypass branch [kg/s]
    std::vector<double> segment_mdot;   ///< per model segment [kg/s]
    std::vector<double> segment_dp;     ///< per model segment [Pa]
    std::vector<double> hx_mdot;        ///< per model heat exchanger [kg/s]
    std::vector<double> hx_dp;          ///< per model heat exchanger [Pa]
    std::vector<double> valve_user_dp;  ///< per model valve, user orifice [Pa]
    std::vector<double> valve_bypass_dp;///< per model valve, bypass orifice [Pa]
    double dp_loops_Pa = 0.0;           ///< common drop from split to join [Pa]
    double dp_total_Pa = 0.0;           ///< plant outlet to plant inlet [Pa]
    int iterations = 0;                 ///< Newton iterations spent
    double pressure_residual_Pa = 0.0;  ///< worst loop-pressure mismatch [Pa]
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Quadratic-law resistance of one element: dp = r * mdot^2, r = k / A^2.
inline double quad_resistance(double k, double area_m2) {
    if (std::isinf(k)) return kInf;
    return k / (area_m2 * area_m2);
}

/// Reference areas used for elements that have no own diameter (valve
/// orifices and exchangers): the nearest downstream pipe, falling back to
/// the loop leg and finally the supply main.
struct LoopAreas {
    double user = 0.0;    ///< area for user orifice + exchanger [m^2]
    double bypass = 0.0;  ///< area for bypass orifice [m^2]
};

inline LoopAreas loop_reference_areas(const NetworkModel& m, const NetworkTopology& topo,
                                      const LoopTopology& loop) {
    auto area_of = [&](const std::vector<std::size_t>& segs, bool front) -> double {
        if (segs.empty()) return 0.0;
        return m.segments[front ? segs.front() : segs.back()].cross_section_m2();
    };
    double fallback = area_of(loop.supply_leg, false);
    if (fallback == 0.0) fallback = area_of(topo.supply_main, false);
    if (fallback == 0.0 && !m.segments.empty()) fallback = m.segments[0].cross_section_m2();
    LoopAreas a;
    a.user = area_of(loop.user_before, true);
    if (a.user == 0.0) a.user = fallback;
    a.bypass = area_of(loop.bypass, true);
    if (a.bypass == 0.0) a.bypass = fallback;
    if (a.user == 0.0 || a.bypass == 0.0)
        throw numeric_error("cannot determine a reference area for valve '" +
                            m.valves[loop.valve].id + "'");
    return a;
}

/// Series resistance of a run of pipe segments.
inline double chain_resistance(const NetworkModel& m, const std::vector<std::size_t>& segs) {
    double r = 0.0;
    for (std::size_t i : segs) r += quad_resistance(m.segments[i].k_tot,
                                                    m.segments[i].cross_section_m2());
    return r;
}

/// Branch resistances of one loop at the given valve opening.
struct BranchResistance {
    double user = 0.0;    ///< valve user orifice + user pipes + exchanger
    double bypass = 0.0;  ///< valve bypass orifice + bypass pipes
};

inline BranchResistance branch_resistance(const NetworkModel& m, const NetworkTopology& topo,
                                          const LoopTopology& loop, double u) {
    const ValveModel& v = m.valves[loop.valve];
    const LoopAreas areas = loop_reference_areas(m, topo, loop);
    BranchResistance r;
    r.user = quad_resistance(v.user_k(u), areas.user);
    if (!std::isinf(r.user)) {
        r.user += chain_resistance(m, loop.user_before) + chain_resistance(m, loop.user_after);
        const HeatExchanger& h = m.heat_exchangers[loop.exchanger];
        r.user += quad_resistance(h.k_tot, areas.user);
    }
    r.bypass = quad_resistance(v.bypass_k(u), areas.bypass);
    if (!std::isinf(r.bypass)) r.bypass += chain_resistance(m, loop.bypass);
    return r;
}

/// Effective resistance of two parallel branches (dp = r * mdot_loop^2).
inline double parallel_resistance(double ru, double rb) {
    if (std::isinf(ru) && std::isinf(rb)) return kInf;
    if (std::isinf(ru)) return rb;
    if (std::isinf(rb)) return ru;
    if (ru == 0.0 || rb == 0.0) return 0.0;
    const double s = std::sqrt(ru) * std::sqrt(rb) / (std::sqrt(ru) + std::sqrt(rb));
    return s * s;
}

}  // namespace detail

/**
 * @brief Solve the flow distribution for valve openings @p valve_u (one value
 *        per model valve, in model order).
 *
 * The total flow is imposed by the plant pump.  Loop flows are found with a
 * damped Newton iteration on the pressure-balance residuals; for two loops a
 * bisection fallback guards against a stalled Newton.  The split between the
 * user and bypass branch of each loop follows in closed form.
 *
 * @throws numeric_error when every loop is shut or the iteration fails.
 */
inline FlowState solve_flows(const NetworkModel& m, const NetworkTopology& topo,
                             const std::vector<double>& valve_u) {
    if (valve_u.size() != m.valves.size())
        throw std::invalid_argument("need one valve opening per valve");
    const std::size_t n = topo.loops.size();
    const double mdot_total = m.plant.mdot_kgps;

    // Per-loop series resistance: supply leg + parallel branches + return leg.
    std::vector<detail::BranchResistance> rbranch(n);
    std::vector<double> rloop(n);
    for (std::size_t i = 0; i < n; ++i) {
        const LoopTopology& loop = topo.loops[i];
        rbranch[i] = detail::branch_resistance(m, topo, loop, valve_u[loop.valve]);
        const double rpar = detail::parallel_resistance(rbranch[i].user, rbranch[i].bypass);
        if (std::isinf(rpar)) {
            rloop[i] = detail::kInf;
        } else {
            rloop[i] = rpar + detail::chain_resistance(m, loop.supply_leg) +
                       detail::chain_resistance(m, loop.return_leg);
        }
    }

    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isinf(rloop[i])) active.push_back(i);
    if (active.empty())
        throw numeric_error("no open flow path: every consumer loop is fully shut");

    // Initial guess: the closed-form distribution for quadratic losses,
    // mdot_i proportional to 1/sqrt(r_i).  The Newton iteration then polishes
    // the pressure balance to tolerance.
    const std::size_t na = active.size();
    std::vector<double> flow(na, 0.0);
    {
        double wsum = 0.0;
        std::vector<double> w(na);
        for (std::size_t a = 0; a < na; ++a) {
            w[a] = 1.0 / std::sqrt(rloop[active[a]] + 1e-300);
            wsum += w[a];
        }
        for (std::size_t a = 0; a < na; ++a) flow[a] = mdot_total * w[a] / wsum;
    }

    int iterations = 0;
    double residual = 0.0;
    if (na > 1) {
        auto dp_of = [&](std::size_t a, double mdot) {
            return rloop[active[a]] * mdot * mdot;
        };
        const int max_iter = 100;
        const std::size_t last = na - 1;
        std::vector<double> f(last), dx(last);
        for (; iterations < max_iter; ++iterations) {
            double mlast = mdot_total;
            for (std::size_t a = 0; a < last; ++a) mlast -= flow[a];
            double dp_scale = 1.0;  // [Pa] floor so the tolerance is meaningful
            for (std::size_t a = 0; a < last; ++a) {
                f[a] = dp_of(a, flow[a]) - dp_of(last, mlast);
                dp_scale = std::max({dp_scale, dp_of(a, flow[a]), dp_of(last, mlast)});
            }
            residual = 0.0;
            for (std::size_t a = 0; a < last; ++a) residual = std::max(residual, std::fabs(f[a]));
            if (residual <= 1e-9 * dp_scale) break;

            // J = diag(dpi') + dpN' * ones: solve directly via the
            // Sherman-Morrison structure.
            const double gN = 2.0 * rloop[active[last]] * mlast;
            std::vector<double> gi(last);
            for (std::size_t a = 0; a < last; ++a)
                gi[a] = std::max(2.0 * rloop[active[a]] * flow[a], 1e-300);
            // Solve (D + gN * 1 1^T) dx = -f
            double denom = 1.0, rhs = 0.0;
            for (std::size_t a = 0; a < last; ++a) {
                denom += gN / gi[a];
                rhs += f[a] / gi[a];
            }
            const double correction = gN * rhs / denom;
            for (std::size_t a = 0; a < last; ++a) dx[a] = -(f[a] - correction) / gi[a];

            // Damp the step so every loop flow stays inside (0, total).
            double alpha = 1.0;
            for (int halving = 0; halving < 60; ++halving) {
                bool ok = true;
                double ml = mdot_total;
                for (std::size_t a = 0; a < last; ++a) {
                    const double cand = flow[a] + alpha * dx[a];
                    if (cand < 0.0 || cand > mdot_total) ok = false;
                    ml -= cand;
                }
                if (ml < 0.0 || ml > mdot_total) ok = false;
                if (ok) break;
                alpha *= 0.5;
            }
            for (std::size_t a = 0; a < last; ++a) flow[a] += alpha * dx[a];
        }
        if (residual > 1e-6 && na == 2) {
            // Bisection fallback on the first loop flow: the pressure
            // mismatch is monotone in it.
            double lo = 0.0, hi = mdot_total;
            auto mismatch = [&](double m1) {
                return dp_of(0, m1) - dp_of(1, mdot_total - m1);
            };
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (mismatch(mid) > 0.0) hi = mid;
                else lo = mid;
            }
            flow[0] = 0.5 * (lo + hi);
            residual = std::fabs(mismatch(flow[0]));
        }
        {
            double dp_scale = 1.0;
            double mlast = mdot_total;
            for (std::size_t a = 0; a + 1 < na; ++a) mlast -= flow[a];
            flow[na - 1] = mlast;
            for (std::size_t a = 0; a < na; ++a)
                dp_scale = std::max(dp_scale, dp_of(a, flow[a]));
            if (residual > 1e-6 * dp_scale)
                throw numeric_error("loop flow iteration did not converge");
        }
    }

    FlowState st;
    st.mdot_total_kgps = mdot_total;
    st.loop_kgps.assign(n, 0.0);
    st.user_kgps.assign(n, 0.0);
    st.bypass_kgps.assign(n, 0.0);
    st.segment_mdot.assign(m.segments.size(), 0.0);
    st.segment_dp.assign(m.segments.size(), 0.0);
    st.hx_mdot.assign(m.heat_exchangers.size(), 0.0);
    st.hx_dp.assign(m.heat_exchangers.size(), 0.0);
    st.valve_user_dp.assign(m.valves.size(), 0.0);
    st.valve_bypass_dp.assign(m.valves.size(), 0.0);
    st.iterations = iterations;
    st.pressure_residual_Pa = residual;

    double mlast = mdot_total;
    for (std::size_t a = 0; a + 1 < na; ++a) mlast -= flow[a];
    for (std::size_t a = 0; a < na; ++a)
        st.loop_kgps[active[a]] = (a + 1 < na) ? flow[a] : (na == 1 ? mdot_total : mlast);

    for (std::size_t i = 0; i < n; ++i) {
        const LoopTopology& loop = topo.loops[i];
        const double ml = st.loop_kgps[i];
        const double ru = rbranch[i].user, rb = rbranch[i].bypass;
        double mu = 0.0, mb = 0.0;
        if (ml > 0.0) {
            if (std::isinf(ru)) mb = ml;
            else if (std::isinf(rb)) mu = ml;
            else if (ru == 0.0 && rb == 0.0) mu = mb = 0.5 * ml;
            else {
                const double su = std::sqrt(ru), sb = std::sqrt(rb);
                mu = ml * sb / (su + sb);
                mb = ml - mu;
            }
        }
        st.user_kgps[i] = mu;
        st.bypass_kgps[i] = mb;

        const detail::LoopAreas areas = detail::loop_reference_areas(m, topo, loop);
        const ValveModel& v = m.valves[loop.valve];
        auto set_chain = [&](const std::vector<std::size_t>& segs, double mdot) {
            for (std::size_t s : segs) {
                st.segment_mdot[s] = mdot;
                st.segment_dp[s] =
                    detail::quad_resistance(m.segments[s].k_tot,
                                            m.segments[s].cross_section_m2()) *
                    mdot * mdot;
            }
        };
        set_chain(loop.supply_leg, ml);
        set_chain(loop.return_leg, ml);
        set_chain(loop.user_before, mu);
        set_chain(loop.user_after, mu);
        set_chain(loop.bypass, mb);
        const double ku = v.user_k(valve_u[loop.valve]);
        const double kb = v.bypass_k(valve_u[loop.valve]);
        st.valve_user_dp[loop.valve] =
            mu > 0.0 ? detail::quad_resistance(ku, areas.user) * mu * mu : 0.0;
        st.valve_bypass_dp[loop.valve] =
            mb > 0.0 ? detail::quad_resistance(kb, areas.bypass) * mb * mb : 0.0;
        const HeatExchanger& h = m.heat_exchangers[loop.exchanger];
        st.hx_mdot[loop.exchanger] = mu;
        st.hx_dp[loop.exchanger] = detail::quad_resistance(h.k_tot, areas.user) * mu * mu;
    }

    auto set_main = [&](const std::vector<std::size_t>& segs) {
        for (std::size_t s : segs) {
            st.segment_mdot[s] = mdot_total;
            st.segment_dp[s] = detail::quad_resistance(m.segments[s].k_tot,
                                                       m.segments[s].cross_section_m2()) *
                               mdot_total * mdot_total;
        }
    };
    set_main(topo.supply_main);
    set_main(topo.return_main);

    // Common split-to-join drop, evaluated on the first open loop.
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isinf(rloop[i])) continue;
        st.dp_loops_Pa = rloop[i] * st.loop_kgps[i] * st.loop_kgps[i];
        break;
    }
    st.dp_total_Pa = st.dp_loops_Pa;
    for (std::size_t s : topo.supply_main) st.dp_total_Pa += st.segment_dp[s];
    for (std::size_t s : topo.return_main) st.dp_total_Pa += st.segment_dp[s];
    return st;
}

}  // namespace dhn

#endif  // DHN_HYDRAULICS_HPP
