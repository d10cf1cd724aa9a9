#ifndef DHN_METRICS_HPP
#define DHN_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dhn/config.hpp"
#include "dhn/core.hpp"
#include "dhn/model.hpp"
#include "dhn/similitude.hpp"
#include "dhn/trajectory.hpp"

namespace dhn {

/**
 * @file
 * Post-processing of recorded runs: loss accounting, phase partitioning,
 * efficiency, delay estimation, statistics and run-to-run comparison.
 *
 * Everything here is pure computation over immutable trajectories; nothing
 * mutates a model or re-runs a simulation.  The loss bookkeeping follows the
 * plant sensors: the delivered heat is what the supply/return sensor pair
 * sees, Q_tot = mdot_I c_p (T_s - T_r), and the per-building draw is the
 * enthalpy drop across each exchanger branch, so the ambient remainder
 * Q_amb = Q_tot - sum Q_ThM_i closes exactly by construction.  An
 * independent audit recomputes the same quantity from the model's loss
 * terms (conductances plus stored-energy change) to catch accounting bugs.
 */

// ---------------------------------------------------------------------------
// Column plumbing
// ---------------------------------------------------------------------------

namespace detail {

/// Throw listing every column in @p names the trajectory lacks.
inline void require_columns(const Trajectory& tr, const std::vector<std::string>& names) {
    std::string missing;
    for (const std::string& n : names)
        if (!tr.has(n)) missing += (missing.empty() ? "" : ", ") + n;
    if (!missing.empty()) throw validation_error("trajectory is missing columns: " + missing);
}

/// Ids of the thermal masses present as `<prefix><id><suffix>` columns.
inline std::vector<std::string> column_ids(const Trajectory& tr, const std::string& prefix,
                                           const std::string& suffix) {
    std::vector<std::string> ids;
    for (const std::string& c : tr.columns()) {
        if (c.size() <= prefix.size() + suffix.size()) continue;
        if (c.compare(0, prefix.size(), prefix) != 0) continue;
        if (c.compare(c.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
        ids.push_back(c.substr(prefix.size(), c.size() - prefix.size() - suffix.size()));
    }
    return ids;
}

/// Linear interpolation of samples (t, y) at query point tq, clamped to the ends.
inline double interp_at(const std::vector<double>& t, const std::vector<double>& y, double tq) {
    if (t.empty()) throw validation_error("cannot interpolate an empty series");
    if (tq <= t.front()) return y.front();
    if (tq >= t.back()) return y.back();
    const auto it = std::upper_bound(t.begin(), t.end(), tq);
    const std::size_t hi = static_cast<std::size_t>(it - t.begin());
    const std::size_t lo = hi - 1;
    const double span = t[hi] - t[lo];
    if (span <= 0.0) return y[lo];
    const double w = (tq - t[lo]) / span;
    return y[lo] + w * (y[hi] - y[lo]);
}

/// Trapezoidal integral of the piecewise-linear signal (t, y) over [a, b]
/// clipped to the sampled span.
inline double integrate_clipped(const std::vector<double>& t, const std::vector<double>& y,
                                double a, double b) {
    if (t.size() < 2) return 0.0;
    a = std::max(a, t.front());
    b = std::min(b, t.back());
    if (b <= a) return 0.0;
    const auto first = std::upper_bound(t.begin(), t.end(), a);  // first node > a
    double acc = 0.0;
    double t_prev = a;
    double y_prev = interp_at(t, y, a);
    for (auto it = first; it != t.end() && *it < b; ++it) {
        const std::size_t i = static_cast<std::size_t>(it - t.begin());
        acc += 0.5 * (y_prev + y[i]) * (t[i] - t_prev);
        t_prev = t[i];
        y_prev = y[i];
    }
    acc += 0.5 * (y_prev + interp_at(t, y, b)) * (b - t_prev);
    return acc;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Enthalpy loss accounting
// ---------------------------------------------------------------------------

/**
 * @brief Per-sample heat bookkeeping derived from the trajectory's sensors.
 *
 * `q_amb_W` is defined as the closure remainder, so
 * q_tot = sum(q_thm) + q_amb holds exactly at every sample.
 */
struct LossSeries {
    std::vector<double> t;                     ///< trajectory time axis [s]
    std::vector<std::string> mass_ids;         ///< row order of q_thm_W
    std::vector<double> q_tot_W;               ///< mdot_I c_p (T_s - T_r)
    std::vector<std::vector<double>> q_thm_W;  ///< [mass][sample] branch enthalpy drop
    std::vector<double> q_amb_W;               ///< closure remainder
};

/**
 * @brief Compute the enthalpy loss series from a recorded (dimensional) run.
 *
 * The delivered heat is recomputed from the supply/return temperature
 * columns, and each thermal mass's draw is the enthalpy drop across the
 * exchanger branches serving it, mdot_hx c_p (T_in - T_out).  Works on any
 * trajectory carrying those sensor channels (simulated or ingested).
 */
inline LossSeries enthalpy_losses(const Trajectory& tr, const NetworkModel& m) {
    std::vector<std::string> need = {"t_s", "supply_C", "return_C"};
    for (const HeatExchanger& hx : m.heat_exchangers) {
        need.push_back("hx_" + hx.id + "_in_C");
        need.push_back("hx_" + hx.id + "_out_C");
        need.push_back("mdot_hx_" + hx.id + "_kgps");
    }
    detail::require_columns(tr, need);

    LossSeries ls;
    ls.t = tr.col("t_s");
    const std::size_t n = tr.rows();
    ls.q_tot_W.resize(n);
    ls.q_amb_W.resize(n);
    for (const ThermalMass& tm : m.thermal_masses) ls.mass_ids.push_back(tm.id);
    ls.q_thm_W.assign(ls.mass_ids.size(), std::vector<double>(n, 0.0));

    const std::size_t c_sup = tr.column("supply_C");
    const std::size_t c_ret = tr.column("return_C");
    struct HxCols {
        std::size_t in, out, mdot, mass;
    };
    std::vector<HxCols> hxc;
    for (const HeatExchanger& hx : m.heat_exchangers) {
        std::size_t mass = ls.mass_ids.size();
        for (std::size_t k = 0; k < ls.mass_ids.size(); ++k)
            if (ls.mass_ids[k] == hx.thermal_mass) mass = k;
        if (mass == ls.mass_ids.size())
            throw validation_error("heat exchanger '" + hx.id +
                                   "' references unknown thermal mass '" + hx.thermal_mass + "'");
        hxc.push_back({tr.column("hx_" + hx.id + "_in_C"), tr.column("hx_" + hx.id + "_out_C"),
                       tr.column("mdot_hx_" + hx.id + "_kgps"), mass});
    }

    for (std::size_t r = 0; r < n; ++r) {
        const double q_tot =
            m.plant.mdot_kgps * m.fluid.cp * (tr.at(r, c_sup) - tr.at(r, c_ret));
        double drawn = 0.0;
        for (const HxCols& h : hxc) {
            const double q =
                tr.at(r, h.mdot) * m.fluid.cp * (tr.at(r, h.in) - tr.at(r, h.out));
            ls.q_thm_W[h.mass][r] += q;
            drawn += q;
        }
        ls.q_tot_W[r] = q_tot;
        ls.q_amb_W[r] = q_tot - drawn;
    }
    return ls;
}

/**
 * @brief Independent check of the ambient-loss bookkeeping.
 *
 * The enthalpy route integrates the closure remainder; the summation route
 * integrates the recorded conductance losses of the pipe segments and adds
 * the change in stored pipe energy (the buffer vessel sits downstream of the
 * return sensor, so its standby loss is outside the sensed loop and is
 * reported separately).  The two routes measure the same physics through
 * unrelated code paths; `rel_error` is their mismatch.
 */
struct LossAudit {
    double enthalpy_J = 0.0;   ///< integral of q_amb (sensor route)
    double summation_J = 0.0;  ///< integral of pipe conductance losses + stored-energy change
    double heater_J = 0.0;     ///< buffer standby loss, outside the sensed loop
    double rel_error = 0.0;    ///< |enthalpy - summation| / scale
};

inline LossAudit loss_summation_audit(const Trajectory& tr, const LossSeries& ls) {
    detail::require_columns(tr, {"q_pipe_loss_W", "q_heater_loss_W", "e_store_J"});
    if (tr.rows() != ls.t.size())
        throw validation_error("loss series and trajectory have different sample counts");
    LossAudit a;
    if (ls.t.size() < 2) return a;
    const std::vector<double> pipe = tr.col("q_pipe_loss_W");
    const std::vector<double> heater = tr.col("q_heater_loss_W");
    const std::vector<double> store = tr.col("e_store_J");
    a.enthalpy_J = detail::integrate_clipped(ls.t, ls.q_amb_W, ls.t.front(), ls.t.back());
    a.summation_J = detail::integrate_clipped(ls.t, pipe, ls.t.front(), ls.t.back()) +
                    (store.back() - store.front());
    a.heater_J = detail::integrate_clipped(ls.t, heater, ls.t.front(), ls.t.back());
    double q_abs = 0.0;
    std::vector<double> mag(ls.q_tot_W.size());
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(ls.q_tot_W[i]);
    q_abs = detail::integrate_clipped(ls.t, mag, ls.t.front(), ls.t.back());
    const double scale =
        std::max({std::abs(a.enthalpy_J), std::abs(a.summation_J), 1e-9 * q_abs, 1e-300});
    a.rel_error = std::abs(a.enthalpy_J - a.summation_J) / scale;
    return a;
}

// ---------------------------------------------------------------------------
// Phase partitioning
// ---------------------------------------------------------------------------

/// Closed time interval on the partition's axis.
struct PhaseInterval {
    double t0 = 0.0;
    double t1 = 0.0;
};

/**
 * @brief The run split into operating phases.
 *
 * At each sample the network is in exactly one of four states: `cooling`
 * (every mass outside its comfort windows), `heating` (every mass inside but
 * at least one not yet settled), `steady_state` (every mass inside and
 * settled), or mixed (some in, some out) which belongs only to the overall
 * span.  Intervals are half-open runs of samples extended to the first
 * sample of the next state, so cooling+heating+steady+mixed tile the run.
 */
struct PhasePartition {
    std::string time_column = "t_s";  ///< axis the bounds are expressed on
    double t_begin = 0.0;
    double t_end = 0.0;
    std::vector<PhaseInterval> cooling;
    std::vector<PhaseInterval> heating;
    std::vector<PhaseInterval> steady_state;

    /// Interval list for a phase name; "overall" is the whole span.
    std::vector<PhaseInterval> of(const std::string& phase) const {
        if (phase == "overall") return {{t_begin, t_end}};
        if (phase == "cooling") return cooling;
        if (phase == "heating") return heating;
        if (phase == "steady_state") return steady_state;
        throw validation_error("unknown phase '" + phase + "'");
    }

    static const std::vector<std::string>& phase_names() {
        static const std::vector<std::string> names = {"overall", "cooling", "heating",
                                                       "steady_state"};
        return names;
    }
};

/// Tuning knobs for the partition.
struct PhaseOptions {
    double settle_band_C = 0.5;  ///< |T - setpoint| band counting as settled [degC]
    double settle_hold = 600.0;  ///< how long the band must hold, in axis units
    /// Active setpoints above this count as a heating window when the
    /// partition is derived from trajectory columns alone (a literal cooling
    /// setpoint is 0 degC; pass the scenario overload for exact windows).
    double heating_threshold_C = 5.0;
};

namespace detail {

struct PhaseProbe {
    std::vector<std::size_t> thm_col;
    std::vector<std::size_t> set_col;
    std::vector<double> set_ref;  ///< added to the thm column before comparing
    double band = 0.5;
    double threshold = 5.0;
};

/// Resolve the mass/setpoint columns on either the dimensional or the
/// nondimensional axes and rescale the options to match.
inline PhaseProbe phase_probe(const Trajectory& tr, const PhaseOptions& opt) {
    PhaseProbe p;
    const bool nd = tr.meta.count("nondimensional") != 0;
    const std::string suffix = nd ? "_star" : "_C";
    double T_s = 1.0;
    if (nd) {
        auto it = tr.meta.find("base_T_s");
        if (it == tr.meta.end())
            throw validation_error("nondimensional trajectory lacks base metadata");
        T_s = std::stod(it->second);
    }
    p.band = opt.settle_band_C / T_s;
    p.threshold = opt.heating_threshold_C / T_s;
    std::vector<std::string> missing_sp;
    for (const std::string& id : column_ids(tr, "thm_", suffix)) {
        const std::string sp = "setpoint_" + id + suffix;
        if (!tr.has(sp)) {
            missing_sp.push_back(sp);
            continue;
        }
        p.thm_col.push_back(tr.column("thm_" + id + suffix));
        p.set_col.push_back(tr.column(sp));
        double ref = 0.0;
        if (nd) {
            // thm_*_star is offset by its reference setpoint; the active
            // setpoint column is not.  Shift back before comparing.
            auto rit = tr.meta.find("setpoint_ref_" + id);
            if (rit != tr.meta.end()) ref = std::stod(rit->second) / T_s;
        }
        p.set_ref.push_back(ref);
    }
    if (!missing_sp.empty()) {
        std::string list;
        for (const std::string& s : missing_sp) list += (list.empty() ? "" : ", ") + s;
        throw validation_error("trajectory is missing columns: " + list);
    }
    if (p.thm_col.empty())
        throw validation_error("trajectory has no thermal-mass temperature columns");
    return p;
}

enum class PhaseLabel { mixed, cooling, heating, steady };

inline PhasePartition build_partition(const Trajectory& tr, const PhaseOptions& opt,
                                      const std::vector<char>& inside_all,
                                      const std::vector<char>& outside_all,
                                      const std::vector<char>& in_band) {
    const std::vector<double> t = tr.time();
    const std::size_t n = t.size();
    if (n == 0) throw validation_error("trajectory has no rows");

    // A sample is settled when every lookback sample within the hold window
    // was inside its windows and within the band; the clock restarts whenever
    // either condition breaks.
    std::vector<PhaseLabel> label(n, PhaseLabel::mixed);
    std::size_t ok_since = 0;  // first index of the current inside+band streak
    bool streak = false;
    for (std::size_t k = 0; k < n; ++k) {
        const bool ok = inside_all[k] && in_band[k];
        if (ok && !streak) {
            streak = true;
            ok_since = k;
        } else if (!ok) {
            streak = false;
        }
        if (outside_all[k]) {
            label[k] = PhaseLabel::cooling;
        } else if (inside_all[k]) {
            // Settled: every sample of the lookback window [t-hold, t] was
            // inside and within the band.  A streak reaching back to the
            // first record counts (a run that starts at the setpoint starts
            // settled); otherwise the last violating sample must lie
            // strictly before the window.
            const bool settled =
                streak && (ok_since == 0 || t[k] - t[ok_since - 1] > opt.settle_hold);
            label[k] = settled ? PhaseLabel::steady : PhaseLabel::heating;
        }
    }

    PhasePartition part;
    part.time_column = tr.columns().front();
    part.t_begin = t.front();
    part.t_end = t.back();
    std::size_t k = 0;
    while (k < n) {
        std::size_t j = k;
        while (j + 1 < n && label[j + 1] == label[k]) ++j;
        const double t0 = t[k];
        const double t1 = j + 1 < n ? t[j + 1] : t[j];
        switch (label[k]) {
            case PhaseLabel::cooling: part.cooling.push_back({t0, t1}); break;
            case PhaseLabel::heating: part.heating.push_back({t0, t1}); break;
            case PhaseLabel::steady: part.steady_state.push_back({t0, t1}); break;
            case PhaseLabel::mixed: break;  // belongs only to "overall"
        }
        k = j + 1;
    }
    return part;
}

}  // namespace detail

/**
 * @brief Partition a run into phases from its recorded columns alone.
 *
 * Works on dimensional (`thm_*_C` / `setpoint_*_C`) and nondimensional
 * (`thm_*_star` / `setpoint_*_star`) trajectories; on the latter the band and
 * threshold are rescaled by the stored base and `settle_hold` is read in t*.
 * Window membership is inferred from the active setpoint (above
 * `heating_threshold_C` = inside); use the scenario overload when the
 * scenario is available.
 */
inline PhasePartition partition_phases(const Trajectory& tr, const PhaseOptions& opt = {}) {
    const detail::PhaseProbe p = detail::phase_probe(tr, opt);
    const std::size_t n = tr.rows();
    std::vector<char> inside_all(n, 1), outside_all(n, 1), in_band(n, 1);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t m = 0; m < p.thm_col.size(); ++m) {
            const double sp = tr.at(r, p.set_col[m]);
            const bool inside = sp > p.threshold;
            inside_all[r] = inside_all[r] && inside;
            outside_all[r] = outside_all[r] && !inside;
            const double err = tr.at(r, p.thm_col[m]) + p.set_ref[m] - sp;
            in_band[r] = in_band[r] && inside && std::abs(err) < p.band;
        }
    }
    return detail::build_partition(tr, opt, inside_all, outside_all, in_band);
}

/**
 * @brief Partition using the scenario's comfort windows for membership.
 *
 * Exact window boundaries replace the setpoint-threshold heuristic; the
 * settle band still comes from the recorded temperatures.  Dimensional
 * trajectories only (windows are defined on the seconds axis).
 */
inline PhasePartition partition_phases(const Trajectory& tr, const ExperimentScenario& sc,
                                       const PhaseOptions& opt = {}) {
    if (tr.meta.count("nondimensional"))
        throw validation_error("scenario-based partitioning needs the dimensional trajectory");
    const detail::PhaseProbe p = detail::phase_probe(tr, opt);
    const std::vector<std::string> ids = detail::column_ids(tr, "thm_", "_C");
    const std::vector<double> t = tr.time();
    const std::size_t n = tr.rows();
    std::vector<char> inside_all(n, 1), outside_all(n, 1), in_band(n, 1);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t m = 0; m < ids.size(); ++m) {
            bool inside = false;
            const double sp = active_setpoint(sc, ids[m], t[r], &inside);
            inside_all[r] = inside_all[r] && inside;
            outside_all[r] = outside_all[r] && !inside;
            const double err = tr.at(r, p.thm_col[m]) - sp;
            in_band[r] = in_band[r] && inside && std::abs(err) < p.band;
        }
    }
    return detail::build_partition(tr, opt, inside_all, outside_all, in_band);
}

/// Rescale a partition onto another time axis (e.g. seconds -> t*).
inline PhasePartition scale_partition(PhasePartition p, double factor,
                                      const std::string& new_axis) {
    if (!(factor > 0.0)) throw validation_error("partition time factor must be positive");
    p.time_column = new_axis;
    p.t_begin *= factor;
    p.t_end *= factor;
    for (auto* list : {&p.cooling, &p.heating, &p.steady_state})
        for (PhaseInterval& iv : *list) {
            iv.t0 *= factor;
            iv.t1 *= factor;
        }
    return p;
}

// ---------------------------------------------------------------------------
// Efficiency and energy breakdown
// ---------------------------------------------------------------------------

/// Useful/lost split of the delivered heat over one phase.
struct PhaseEfficiency {
    double span = 0.0;      ///< summed interval length on the axis
    double q_tot_J = 0.0;   ///< integral of delivered heat
    double q_thm_J = 0.0;   ///< integral of the summed building draw
    bool defined = false;   ///< false when the delivered integral is ~0
    double useful = 0.0;    ///< q_thm_J / q_tot_J
    double lost = 0.0;      ///< 1 - useful
};

/**
 * @brief Ratio of extracted to delivered heat per phase.
 *
 * Phases with no intervals are omitted; a phase whose delivered integral is
 * zero is present with `defined == false` (the ratio has no meaning there).
 */
inline std::map<std::string, PhaseEfficiency> efficiency_by_phase(const LossSeries& ls,
                                                                  const PhasePartition& p) {
    if (p.time_column != "t_s")
        throw validation_error("loss series are dimensional; partition axis is " +
                               p.time_column);
    std::vector<double> drawn(ls.t.size(), 0.0);
    for (const std::vector<double>& q : ls.q_thm_W)
        for (std::size_t i = 0; i < q.size(); ++i) drawn[i] += q[i];

    std::map<std::string, PhaseEfficiency> out;
    for (const std::string& phase : PhasePartition::phase_names()) {
        const std::vector<PhaseInterval> ivs = p.of(phase);
        if (ivs.empty()) continue;
        PhaseEfficiency e;
        for (const PhaseInterval& iv : ivs) {
            e.span += iv.t1 - iv.t0;
            e.q_tot_J += detail::integrate_clipped(ls.t, ls.q_tot_W, iv.t0, iv.t1);
            e.q_thm_J += detail::integrate_clipped(ls.t, drawn, iv.t0, iv.t1);
        }
        e.defined = std::abs(e.q_tot_J) > 1e-9;
        if (e.defined) {
            e.useful = e.q_thm_J / e.q_tot_J;
            e.lost = 1.0 - e.useful;
        }
        out[phase] = e;
    }
    return out;
}

/// Where the dissipated heat went during one phase.
struct EnergyBreakdown {
    double pipes_J = 0.0;   ///< segment conductance losses
    double heater_J = 0.0;  ///< buffer vessel standby loss
    double masses_J = 0.0;  ///< thermal-mass losses (coupling + sink)
    bool defined = false;   ///< false when nothing was dissipated
    double pipes = 0.0;     ///< fractions of the dissipated total; sum to 1
    double heater = 0.0;
    double masses = 0.0;
};

/**
 * @brief Split the dissipated heat between pipes, heater standby and masses.
 *
 * Fractions are each share divided by the sum of the three integrals, so
 * they sum to 1 exactly whenever anything was dissipated.
 */
inline std::map<std::string, EnergyBreakdown> energy_breakdown_by_phase(
    const Trajectory& tr, const PhasePartition& p) {
    detail::require_columns(tr, {"q_pipe_loss_W", "q_heater_loss_W"});
    if (p.time_column != tr.columns().front())
        throw validation_error("partition axis " + p.time_column +
                               " does not match the trajectory axis " + tr.columns().front());
    const std::vector<double> t = tr.time();
    const std::vector<double> pipes = tr.col("q_pipe_loss_W");
    const std::vector<double> heater = tr.col("q_heater_loss_W");
    std::vector<double> masses(tr.rows(), 0.0);
    for (const std::string& id : detail::column_ids(tr, "q_out_", "_W")) {
        const std::size_t c = tr.column("q_out_" + id + "_W");
        for (std::size_t r = 0; r < tr.rows(); ++r) masses[r] += tr.at(r, c);
    }

    std::map<std::string, EnergyBreakdown> out;
    for (const std::string& phase : PhasePartition::phase_names()) {
        const std::vector<PhaseInterval> ivs = p.of(phase);
        if (ivs.empty()) continue;
        EnergyBreakdown b;
        for (const PhaseInterval& iv : ivs) {
            b.pipes_J += detail::integrate_clipped(t, pipes, iv.t0, iv.t1);
            b.heater_J += detail::integrate_clipped(t, heater, iv.t0, iv.t1);
            b.masses_J += detail::integrate_clipped(t, masses, iv.t0, iv.t1);
        }
        const double total = b.pipes_J + b.heater_J + b.masses_J;
        b.defined = std::abs(total) > 1e-9;
        if (b.defined) {
            b.pipes = b.pipes_J / total;
            b.heater = b.heater_J / total;
            b.masses = b.masses_J / total;
        }
        out[phase] = b;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Extrema and transport delay
// ---------------------------------------------------------------------------

/// One prominence-filtered local extremum of a sampled signal.
struct Extremum {
    std::size_t index = 0;
    double t = 0.0;
    double value = 0.0;
    bool is_max = true;
    double prominence = 0.0;
};

namespace detail {

/// Local maxima of x with topographic prominence >= min_prominence.
/// Plateaus report their midpoint sample.
inline void collect_maxima(const std::vector<double>& t, const std::vector<double>& x,
                           double min_prominence, bool as_max, std::vector<Extremum>& out) {
    const std::size_t n = x.size();
    std::size_t i = 1;
    while (i + 1 <= n - 1 && n >= 3) {
        if (x[i] > x[i - 1]) {
            std::size_t j = i;
            while (j + 1 < n && x[j + 1] == x[i]) ++j;
            if (j + 1 < n && x[j + 1] < x[i]) {
                const std::size_t peak = (i + j) / 2;
                // Prominence: drop to the lowest saddle separating this peak
                // from higher ground on either side.
                double left_min = x[peak];
                for (std::size_t k = peak; k-- > 0;) {
                    if (x[k] > x[peak]) break;
                    left_min = std::min(left_min, x[k]);
                }
                double right_min = x[peak];
                for (std::size_t k = peak + 1; k < n; ++k) {
                    if (x[k] > x[peak]) break;
                    right_min = std::min(right_min, x[k]);
                }
                const double prom = x[peak] - std::max(left_min, right_min);
                if (prom >= min_prominence)
                    out.push_back({peak, t[peak], as_max ? x[peak] : -x[peak], as_max, prom});
            }
            i = j + 1;
        } else {
            ++i;
        }
    }
}

}  // namespace detail

/**
 * @brief Prominence-filtered local extrema of a sampled signal.
 *
 * @param min_prominence absolute prominence floor; extrema whose topographic
 *        prominence falls below it are discarded (ripple suppression).
 */
inline std::vector<Extremum> find_extrema(const std::vector<double>& t,
                                          const std::vector<double>& x,
                                          double min_prominence) {
    if (t.size() != x.size()) throw validation_error("extremum series lengths differ");
    std::vector<Extremum> out;
    if (x.size() < 3) return out;
    detail::collect_maxima(t, x, min_prominence, true, out);
    std::vector<double> neg(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];
    detail::collect_maxima(t, neg, min_prominence, false, out);
    std::sort(out.begin(), out.end(),
              [](const Extremum& a, const Extremum& b) { return a.index < b.index; });
    return out;
}

/// Average supply-to-return extremum offset.
struct DelayEstimate {
    double delay = 0.0;         ///< mean offset on the input axis
    double delay_s = 0.0;       ///< same, in seconds (filled by the trajectory overload)
    double delay_t_star = 0.0;  ///< same, nondimensional
    std::size_t pairs = 0;      ///< matched extremum pairs
    double spread = 0.0;        ///< max |offset - mean| across pairs
};

/**
 * @brief Transport delay by the peak-valley method.
 *
 * Extrema of both series are prominence-filtered at @p prominence_frac of
 * each signal's range, then every supply extremum is paired with the nearest
 * unused return extremum of the same polarity; the delay is the mean offset.
 * Pairs farther apart than a quarter of the typical supply extremum spacing
 * are rejected (an unmatched extremum near a data edge must not distort the
 * mean).  Throws "insufficient signal variation" when nothing pairs.
 */
inline DelayEstimate peak_valley_delay(const std::vector<double>& t,
                                       const std::vector<double>& supply,
                                       const std::vector<double>& ret,
                                       double prominence_frac = 0.05) {
    if (t.size() != supply.size() || t.size() != ret.size())
        throw validation_error("delay series lengths differ");
    auto range = [](const std::vector<double>& x) {
        const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
        return x.empty() ? 0.0 : *hi - *lo;
    };
    const std::vector<Extremum> es = find_extrema(t, supply, prominence_frac * range(supply));
    const std::vector<Extremum> er = find_extrema(t, ret, prominence_frac * range(ret));
    if (es.empty() || er.empty())
        throw validation_error("insufficient signal variation to estimate a delay");

    // The pairing gate (quarter period) comes from the extremum rhythm.
    // Consecutive opposite-polarity extrema sit half a period apart, and that
    // spacing stays meaningful even when equal-height sibling peaks appear
    // (periodic ripple splits a crest into exact twins whose tight mutual
    // spacing would poison a same-polarity median).  Signals that never
    // alternate fall back to the same-polarity spacing; with too few extrema
    // the gate stays open.
    double gate = std::numeric_limits<double>::infinity();
    {
        std::vector<double> opposite, same;
        for (std::size_t i = 1; i < es.size(); ++i)
            (es[i].is_max != es[i - 1].is_max ? opposite : same)
                .push_back(es[i].t - es[i - 1].t);
        std::vector<double>& gaps = opposite.empty() ? same : opposite;
        if (!gaps.empty()) {
            std::sort(gaps.begin(), gaps.end());
            gate = (opposite.empty() ? 0.25 : 0.5) * gaps[gaps.size() / 2];
        }
    }

    std::vector<char> used(er.size(), 0);
    std::vector<double> offsets;
    for (const Extremum& s : es) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_i = er.size();
        for (std::size_t i = 0; i < er.size(); ++i) {
            if (used[i] || er[i].is_max != s.is_max) continue;
            const double d = std::abs(er[i].t - s.t);
            if (d < best) {
                best = d;
                best_i = i;
            }
        }
        if (best_i == er.size() || best > gate) continue;
        used[best_i] = 1;
        offsets.push_back(er[best_i].t - s.t);
    }
    if (offsets.empty())
        throw validation_error("insufficient signal variation to estimate a delay");

    DelayEstimate d;
    d.pairs = offsets.size();
    for (double o : offsets) d.delay += o;
    d.delay /= static_cast<double>(offsets.size());
    for (double o : offsets) d.spread = std::max(d.spread, std::abs(o - d.delay));
    return d;
}

/**
 * @brief Delay between the supply and return sensors of a recorded run,
 *        reported on both axes.
 *
 * Detects whether the trajectory is dimensional (axis t_s, default columns
 * supply_C/return_C) or nondimensional (t_star, supply_star/return_star) and
 * converts the result with @p base.
 */
inline DelayEstimate peak_valley_delay(const Trajectory& tr, const NondimBase& base,
                                       std::string supply_col = "", std::string return_col = "",
                                       double prominence_frac = 0.05) {
    const bool nd = tr.meta.count("nondimensional") != 0;
    if (supply_col.empty()) supply_col = nd ? "supply_star" : "supply_C";
    if (return_col.empty()) return_col = nd ? "return_star" : "return_C";
    detail::require_columns(tr, {supply_col, return_col});
    DelayEstimate d =
        peak_valley_delay(tr.time(), tr.col(supply_col), tr.col(return_col), prominence_frac);
    if (nd) {
        d.delay_t_star = d.delay;
        d.delay_s = dim_time(d.delay, base);
    } else {
        d.delay_s = d.delay;
        d.delay_t_star = nondim_time(d.delay, base);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// Summary statistics of one sample vector.
struct SignalStats {
    std::size_t n = 0;
    double mean = 0.0;
    double stddev = 0.0;  ///< population standard deviation
    double min = 0.0;
    double max = 0.0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

namespace detail {

/// Linear-interpolation quantile (the common "type 7" rule) via selection.
inline double quantile(std::vector<double>& scratch, double p) {
    const std::size_t n = scratch.size();
    if (n == 1) return scratch[0];
    const double h = p * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    std::nth_element(scratch.begin(), scratch.begin() + lo, scratch.end());
    const double a = scratch[lo];
    if (frac == 0.0 || lo + 1 >= n) return a;
    const double b = *std::min_element(scratch.begin() + lo + 1, scratch.end());
    return a + frac * (b - a);
}

}  // namespace detail

/// Mean/STD/extremes/quartiles of a sample vector; throws when empty.
inline SignalStats signal_statistics(const std::vector<double>& x) {
    if (x.empty()) throw validation_error("cannot compute statistics of an empty interval");
    SignalStats s;
    s.n = x.size();
    for (double v : x) s.mean += v;
    s.mean /= static_cast<double>(s.n);
    double var = 0.0;
    for (double v : x) var += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(s.n));
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    s.min = *lo;
    s.max = *hi;
    std::vector<double> scratch = x;
    s.q25 = detail::quantile(scratch, 0.25);
    s.median = detail::quantile(scratch, 0.50);
    s.q75 = detail::quantile(scratch, 0.75);
    return s;
}

/// [mass id][phase name] -> statistics of T_ThM* over that phase.
using MassStatsTable = std::map<std::string, std::map<std::string, SignalStats>>;

/**
 * @brief Per-mass, per-phase statistics of the nondimensional mass
 *        temperatures.
 *
 * Requires a nondimensional trajectory whose axis matches the partition's.
 * Phases with intervals but no samples raise an error; phases with no
 * intervals are omitted.
 */
inline MassStatsTable trajectory_statistics(const Trajectory& nd, const PhasePartition& p) {
    if (!nd.meta.count("nondimensional"))
        throw validation_error("trajectory statistics need the nondimensional trajectory");
    if (p.time_column != nd.columns().front())
        throw validation_error("partition axis " + p.time_column +
                               " does not match the trajectory axis " + nd.columns().front());
    const std::vector<std::string> ids = detail::column_ids(nd, "thm_", "_star");
    if (ids.empty())
        throw validation_error("trajectory has no thermal-mass temperature columns");
    const std::vector<double> t = nd.time();

    MassStatsTable table;
    for (const std::string& id : ids) {
        const std::size_t c = nd.column("thm_" + id + "_star");
        for (const std::string& phase : PhasePartition::phase_names()) {
            const std::vector<PhaseInterval> ivs = p.of(phase);
            if (ivs.empty()) continue;
            std::vector<double> samples;
            for (std::size_t r = 0; r < nd.rows(); ++r) {
                for (const PhaseInterval& iv : ivs)
                    if (t[r] >= iv.t0 - kTimeEps && t[r] <= iv.t1 + kTimeEps) {
                        samples.push_back(nd.at(r, c));
                        break;
                    }
            }
            if (samples.empty())
                throw validation_error("phase '" + phase + "' covers no samples of mass '" +
                                       id + "'");
            table[id][phase] = signal_statistics(samples);
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Run comparison
// ---------------------------------------------------------------------------

/// Pointwise comparison of one shared column over the common t* grid.
struct ColumnComparison {
    std::string column;
    double rms = 0.0;
    double max_abs = 0.0;
    double mean_full = 0.0;
    double mean_lab = 0.0;
    bool ratio_defined = false;
    double mean_ratio = 0.0;  ///< mean_full / mean_lab
};

/// Result of overlaying two runs on the shared nondimensional clock.
struct ComparisonReport {
    double t_begin = 0.0;  ///< shared t* span
    double t_end = 0.0;
    std::size_t samples = 0;
    std::vector<ColumnComparison> columns;
    double max_thm_rms = 0.0;  ///< worst RMS over the thm_* columns
    /// Design-point group residuals, filled when both models are supplied.
    std::map<std::string, double> pi_residuals;
    /// Shared-grid overlay: t_star plus <col>_full / <col>_lab pairs.
    Trajectory overlay;
};

/// Optional extras for compare_runs.
struct CompareOptions {
    const NetworkModel* full_model = nullptr;  ///< enables the π residual table
    const NetworkModel* lab_model = nullptr;
    double full_ambient_C = 20.0;  ///< design ambients for the residual probes
    double lab_ambient_C = 20.0;
    double design_valve_u = 0.5;
    double prominence_frac = 0.05;  ///< reserved for future extremum overlays
};

namespace detail {

/// Bring a run onto the nondimensional axes if it is not there already.
/// Reference setpoints come from the model when given, otherwise from the
/// largest recorded active setpoint per mass (cooling commands 0).  Mixing
/// the two conventions across the operands of one comparison shifts the
/// mass-temperature deviations against each other, so pass both models (or
/// neither) when schedules override the design setpoints.
inline Trajectory ensure_nondim(const Trajectory& tr, const NondimBase& base,
                                const NetworkModel* m) {
    if (tr.meta.count("nondimensional")) {
        const char* keys[] = {"base_rho", "base_mdot_I", "base_T_s", "base_D"};
        const double vals[] = {base.rho, base.mdot_I, base.T_s, base.D};
        for (int i = 0; i < 4; ++i) {
            auto it = tr.meta.find(keys[i]);
            if (it != tr.meta.end() && rel_diff(std::stod(it->second), vals[i]) > 1e-9)
                throw validation_error(
                    "trajectory was nondimensionalized with a different base (" +
                    std::string(keys[i]) + ")");
        }
        return tr;
    }
    if (m) return nondimensionalize_trajectory(tr, base, *m);
    std::map<std::string, double> setpoints;
    for (const std::string& id : column_ids(tr, "setpoint_", "_C")) {
        const std::size_t c = tr.column("setpoint_" + id + "_C");
        double ref = 0.0;
        for (std::size_t r = 0; r < tr.rows(); ++r) ref = std::max(ref, tr.at(r, c));
        setpoints[id] = ref;
    }
    return nondimensionalize_trajectory(tr, base, setpoints);
}

}  // namespace detail

/**
 * @brief Overlay two runs on the shared nondimensional clock.
 *
 * Both runs are nondimensionalized (if not already), resampled onto the
 * first run's t* grid restricted to the overlapping span, and compared
 * column by column.  The mean-ratio diagnostic (full over lab) flags group
 * mismatches that leave the trajectories similar in shape but different in
 * magnitude.  When both models are passed in the options, the dimensionless
 * groups of the two designs are re-evaluated at their design states and the
 * worst relative residual per group is reported.
 */
inline ComparisonReport compare_runs(const Trajectory& full_tr, const Trajectory& lab_tr,
                                     const NondimBase& full_base, const NondimBase& lab_base,
                                     const CompareOptions& opt = {}) {
    const Trajectory a = detail::ensure_nondim(full_tr, full_base, opt.full_model);
    const Trajectory b = detail::ensure_nondim(lab_tr, lab_base, opt.lab_model);
    const std::vector<double> ta = a.time();
    const std::vector<double> tb = b.time();
    if (ta.empty() || tb.empty()) throw validation_error("cannot compare an empty trajectory");
    const double lo = std::max(ta.front(), tb.front());
    const double hi = std::min(ta.back(), tb.back());
    if (hi < lo)
        throw span_error("the runs do not overlap in nondimensional time");

    ComparisonReport rep;
    rep.t_begin = lo;
    rep.t_end = hi;
    std::vector<double> grid;
    for (double v : ta)
        if (v >= lo - kTimeEps && v <= hi + kTimeEps) grid.push_back(std::min(std::max(v, lo), hi));
    if (grid.empty()) grid.push_back(lo);
    rep.samples = grid.size();

    std::vector<std::string> shared;
    for (const std::string& c : a.columns())
        if (c != "t_star" && b.has(c)) shared.push_back(c);

    std::vector<std::string> overlay_cols = {"t_star"};
    std::vector<std::vector<double>> overlay_data;
    overlay_data.push_back(grid);

    for (const std::string& c : shared) {
        const std::vector<double> ya = a.col(c);
        const std::vector<double> yb = b.col(c);
        ColumnComparison cc;
        cc.column = c;
        std::vector<double> va(grid.size()), vb(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            va[i] = detail::interp_at(ta, ya, grid[i]);
            vb[i] = detail::interp_at(tb, yb, grid[i]);
            const double d = vb[i] - va[i];
            cc.rms += d * d;
            cc.max_abs = std::max(cc.max_abs, std::abs(d));
            cc.mean_full += va[i];
            cc.mean_lab += vb[i];
        }
        const double n = static_cast<double>(grid.size());
        cc.rms = std::sqrt(cc.rms / n);
        cc.mean_full /= n;
        cc.mean_lab /= n;
        cc.ratio_defined = std::abs(cc.mean_lab) > 1e-300;
        if (cc.ratio_defined) cc.mean_ratio = cc.mean_full / cc.mean_lab;
        if (c.rfind("thm_", 0) == 0) rep.max_thm_rms = std::max(rep.max_thm_rms, cc.rms);
        rep.columns.push_back(cc);
        overlay_cols.push_back(c + "_full");
        overlay_data.push_back(std::move(va));
        overlay_cols.push_back(c + "_lab");
        overlay_data.push_back(std::move(vb));
    }

    rep.overlay.meta["nondimensional"] = "1";
    rep.overlay.set_columns(overlay_cols);
    std::vector<double> row(overlay_cols.size());
    for (std::size_t r = 0; r < grid.size(); ++r) {
        for (std::size_t c = 0; c < overlay_data.size(); ++c) row[c] = overlay_data[c][r];
        rep.overlay.add_row(row);
    }

    const auto probeable = [](const NetworkModel& m) {
        return !m.segments.empty() && !m.heat_exchangers.empty() && !m.thermal_masses.empty();
    };
    if (opt.full_model && opt.lab_model && probeable(*opt.full_model) &&
        probeable(*opt.lab_model)) {
        const NetworkModel& F = *opt.full_model;
        const NetworkModel& L = *opt.lab_model;
        const detail::DesignState dsF =
            detail::design_state(F, opt.design_valve_u, opt.full_ambient_C);
        const detail::DesignState dsL =
            detail::design_state(L, opt.design_valve_u, opt.lab_ambient_C);
        auto track = [&](const std::string& g, double r) {
            double& slot = rep.pi_residuals[g];
            if (std::abs(r) > std::abs(slot)) slot = r;
        };
        for (const char* g : {"T_p_star", "pi1", "pi2", "pi3", "pi4", "pi5", "pi6"})
            rep.pi_residuals[g] = 0.0;
        track("T_p_star", detail::rel_residual(opt.lab_ambient_C / lab_base.T_s,
                                               opt.full_ambient_C / full_base.T_s));
        auto probe = [&](const NetworkModel& m, const detail::DesignState& ds,
                         const NondimBase& base, double amb, std::size_t si, std::size_t hi_,
                         std::size_t mi) {
            PiProbe p{m.segments[si].id, m.heat_exchangers[hi_].id, m.thermal_masses[mi].id};
            return compute_pi_groups(m, ds.flow, ds.lay, ds.T, base, 0.0, amb, p,
                                     PiMode::design, 0.0);
        };
        const std::size_t ns = std::min(F.segments.size(), L.segments.size());
        for (std::size_t si = 0; si < ns; ++si) {
            const PiGroupSet gF = probe(F, dsF, full_base, opt.full_ambient_C, si, 0, 0);
            const PiGroupSet gL = probe(L, dsL, lab_base, opt.lab_ambient_C, si, 0, 0);
            track("pi1", detail::rel_residual(gL.pi1, gF.pi1));
            track("pi2", detail::rel_residual(gL.pi2, gF.pi2));
            track("pi3", detail::rel_residual(gL.pi3, gF.pi3));
        }
        const std::size_t nh = std::min(F.heat_exchangers.size(), L.heat_exchangers.size());
        for (std::size_t hi_ = 0; hi_ < nh; ++hi_) {
            const PiGroupSet gF = probe(F, dsF, full_base, opt.full_ambient_C, 0, hi_, 0);
            const PiGroupSet gL = probe(L, dsL, lab_base, opt.lab_ambient_C, 0, hi_, 0);
            track("pi5", detail::rel_residual(gL.pi5, gF.pi5));
        }
        const std::size_t nm = std::min(F.thermal_masses.size(), L.thermal_masses.size());
        for (std::size_t mi = 0; mi < nm; ++mi) {
            const PiGroupSet gF = probe(F, dsF, full_base, opt.full_ambient_C, 0, 0, mi);
            const PiGroupSet gL = probe(L, dsL, lab_base, opt.lab_ambient_C, 0, 0, mi);
            track("pi4", detail::rel_residual(gL.pi4, gF.pi4));
            track("pi6", detail::rel_residual(gL.pi6, gF.pi6));
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// External data ingestion
// ---------------------------------------------------------------------------

/**
 * @brief Read a `[channel_map]` section mapping DAQ channel names to model
 *        quantities (e.g. `TM1 = supply_C`, `F1 = mdot_hx_hx1_kgps`).
 *
 * The reserved key `t_scale` (default 1) multiplies the time column, for
 * loggers that stamp minutes or hours.
 */
struct ChannelMap {
    std::map<std::string, std::string> rename;  ///< external name -> canonical name
    double t_scale = 1.0;
};

inline ChannelMap channel_map_from_config(const ConfigDocument& doc) {
    const ConfigSection* sec = doc.find("channel_map");
    if (!sec) throw validation_error(doc.path + ": missing [channel_map] section");
    ChannelMap cm;
    for (const auto& e : sec->entries) {
        e.used = true;
        if (e.key == "t_scale") {
            cm.t_scale = std::stod(e.value);
            if (!(cm.t_scale > 0.0))
                throw validation_error(doc.path + ": t_scale must be positive");
        } else {
            cm.rename[e.key] = e.value;
        }
    }
    if (cm.rename.empty())
        throw validation_error(doc.path + ": [channel_map] maps no channels");
    return cm;
}

/**
 * @brief Rename external CSV channels to the canonical column names.
 *
 * Every mapped external column must exist; unmapped columns pass through
 * untouched.  The result is reordered so `t_s` leads (the time axis), and
 * its values are multiplied by `t_scale`.
 */
inline Trajectory apply_channel_map(const Trajectory& raw, const ChannelMap& cm) {
    std::string missing;
    for (const auto& [ext, canon] : cm.rename) {
        (void)canon;
        if (!raw.has(ext)) missing += (missing.empty() ? "" : ", ") + ext;
    }
    if (!missing.empty())
        throw validation_error("external trajectory is missing mapped columns: " + missing);

    std::vector<std::string> names;
    for (const std::string& c : raw.columns()) {
        auto it = cm.rename.find(c);
        names.push_back(it == cm.rename.end() ? c : it->second);
    }
    const auto t_pos = std::find(names.begin(), names.end(), "t_s");
    if (t_pos == names.end())
        throw validation_error("channel map yields no t_s time column");
    const std::size_t t_col = static_cast<std::size_t>(t_pos - names.begin());

    std::vector<std::size_t> order = {t_col};
    for (std::size_t c = 0; c < names.size(); ++c)
        if (c != t_col) order.push_back(c);

    Trajectory out;
    out.meta = raw.meta;
    std::vector<std::string> reordered;
    for (std::size_t c : order) reordered.push_back(names[c]);
    out.set_columns(reordered);
    std::vector<double> row(order.size());
    for (std::size_t r = 0; r < raw.rows(); ++r) {
        for (std::size_t c = 0; c < order.size(); ++c) {
            double v = raw.at(r, order[c]);
            if (order[c] == t_col) v *= cm.t_scale;
            row[c] = v;
        }
        out.add_row(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Aggregate report
// ---------------------------------------------------------------------------

/// Everything the post-processing pipeline produces for one run.
struct MetricsReport {
    PhasePartition partition;  ///< on the seconds axis
    std::map<std::string, PhaseEfficiency> efficiency;
    std::map<std::string, EnergyBreakdown> breakdown;
    LossAudit audit;
    bool delay_defined = false;
    DelayEstimate delay;
    std::string delay_note;  ///< why the delay is absent, when it is
    MassStatsTable stats;    ///< T_ThM* statistics per mass and phase
    std::map<std::string, double> tracking_rms_C;  ///< per mass, over active windows
};

/**
 * @brief Run the full metrics pipeline on one recorded (dimensional) run.
 *
 * Losses and efficiency come from the sensor columns; phases from the
 * scenario windows when supplied (heuristic otherwise); statistics from the
 * nondimensionalized trajectory on the scaled partition.  A supply signal
 * without usable extrema leaves the delay absent with an explanatory note.
 */
inline MetricsReport compute_metrics(const Trajectory& tr, const NetworkModel& m,
                                     const NondimBase& base,
                                     const ExperimentScenario* sc = nullptr,
                                     PhaseOptions opt = {}) {
    if (tr.meta.count("nondimensional"))
        throw validation_error("metrics run on the dimensional trajectory");
    if (sc && sc->steady_hold_s > 0.0) opt.settle_hold = sc->steady_hold_s;

    MetricsReport rep;
    const LossSeries losses = enthalpy_losses(tr, m);
    rep.partition = sc ? partition_phases(tr, *sc, opt) : partition_phases(tr, opt);
    rep.efficiency = efficiency_by_phase(losses, rep.partition);
    rep.breakdown = energy_breakdown_by_phase(tr, rep.partition);
    rep.audit = loss_summation_audit(tr, losses);
    try {
        rep.delay = peak_valley_delay(tr, base);
        rep.delay_defined = true;
    } catch (const validation_error& e) {
        rep.delay_note = e.what();
    }

    const Trajectory nd = nondimensionalize_trajectory(tr, base, m);
    const double factor = base.mdot_I / (base.rho * base.D * base.D * base.D);
    rep.stats = trajectory_statistics(nd, scale_partition(rep.partition, factor, "t_star"));

    for (const std::string& id : detail::column_ids(tr, "thm_", "_C")) {
        const std::string sp_col = "setpoint_" + id + "_C";
        if (!tr.has(sp_col)) continue;
        const std::size_t ct = tr.column("thm_" + id + "_C");
        const std::size_t cs = tr.column(sp_col);
        double acc = 0.0;
        std::size_t n = 0;
        for (std::size_t r = 0; r < tr.rows(); ++r) {
            const double sp = tr.at(r, cs);
            if (sp <= opt.heating_threshold_C) continue;
            const double e = tr.at(r, ct) - sp;
            acc += e * e;
            ++n;
        }
        if (n > 0) rep.tracking_rms_C[id] = std::sqrt(acc / static_cast<double>(n));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace detail

/// Human-readable metrics summary.
inline std::string metrics_report_text(const MetricsReport& r) {
    std::ostringstream os;
    os << "run metrics\n===========\n";
    os << "phases (" << r.partition.time_column << " axis, " << detail::fmt_g(r.partition.t_begin)
       << " .. " << detail::fmt_g(r.partition.t_end) << ")\n";
    for (const std::string& phase : PhasePartition::phase_names()) {
        const auto ivs = r.partition.of(phase);
        double span = 0.0;
        for (const PhaseInterval& iv : ivs) span += iv.t1 - iv.t0;
        os << "  " << phase << ": " << ivs.size() << " interval(s), " << detail::fmt_g(span)
           << "\n";
    }
    os << "efficiency\n";
    for (const auto& [phase, e] : r.efficiency) {
        os << "  " << phase << ": ";
        if (e.defined)
            os << "useful " << detail::fmt_g(e.useful) << ", lost " << detail::fmt_g(e.lost);
        else
            os << "undefined (no heat delivered)";
        os << "  [delivered " << detail::fmt_g(e.q_tot_J) << " J]\n";
    }
    os << "energy breakdown (fractions of dissipated heat)\n";
    for (const auto& [phase, b] : r.breakdown) {
        os << "  " << phase << ": ";
        if (b.defined)
            os << "pipes " << detail::fmt_g(b.pipes) << ", heater " << detail::fmt_g(b.heater)
               << ", masses " << detail::fmt_g(b.masses);
        else
            os << "undefined (nothing dissipated)";
        os << "\n";
    }
    os << "loss audit: enthalpy route " << detail::fmt_g(r.audit.enthalpy_J)
       << " J, summation route " << detail::fmt_g(r.audit.summation_J) << " J, mismatch "
       << detail::fmt_g(r.audit.rel_error * 100.0) << " %\n";
    if (r.delay_defined)
        os << "transport delay: " << detail::fmt_g(r.delay.delay_s) << " s (t* "
           << detail::fmt_g(r.delay.delay_t_star) << ", " << r.delay.pairs << " pairs)\n";
    else
        os << "transport delay: not measurable (" << r.delay_note << ")\n";
    os << "thermal-mass statistics (T_ThM*)\n";
    for (const auto& [id, phases] : r.stats)
        for (const auto& [phase, s] : phases)
            os << "  " << id << " " << phase << ": mean " << detail::fmt_g(s.mean) << ", std "
               << detail::fmt_g(s.stddev) << ", median " << detail::fmt_g(s.median) << ", iqr ["
               << detail::fmt_g(s.q25) << ", " << detail::fmt_g(s.q75) << "]\n";
    for (const auto& [id, rms] : r.tracking_rms_C)
        os << "tracking rms " << id << ": " << detail::fmt_g(rms) << " degC\n";
    return os.str();
}

/// Machine-readable long-format CSV: section,phase,name,value.
inline std::string metrics_report_csv(const MetricsReport& r) {
    std::ostringstream os;
    os << "section,phase,name,value\n";
    auto row = [&](const std::string& sec, const std::string& phase, const std::string& name,
                   double v) { os << sec << "," << phase << "," << name << "," << v << "\n"; };
    for (const auto& [phase, e] : r.efficiency) {
        row("efficiency", phase, "defined", e.defined ? 1.0 : 0.0);
        row("efficiency", phase, "useful", e.useful);
        row("efficiency", phase, "lost", e.lost);
        row("efficiency", phase, "q_tot_J", e.q_tot_J);
        row("efficiency", phase, "q_thm_J", e.q_thm_J);
    }
    for (const auto& [phase, b] : r.breakdown) {
        row("breakdown", phase, "pipes", b.pipes);
        row("breakdown", phase, "heater", b.heater);
        row("breakdown", phase, "masses", b.masses);
    }
    row("audit", "overall", "enthalpy_J", r.audit.enthalpy_J);
    row("audit", "overall", "summation_J", r.audit.summation_J);
    row("audit", "overall", "rel_error", r.audit.rel_error);
    if (r.delay_defined) {
        row("delay", "overall", "delay_s", r.delay.delay_s);
        row("delay", "overall", "delay_t_star", r.delay.delay_t_star);
        row("delay", "overall", "pairs", static_cast<double>(r.delay.pairs));
    }
    for (const auto& [id, phases] : r.stats)
        for (const auto& [phase, s] : phases) {
            row("stats_" + id, phase, "mean", s.mean);
            row("stats_" + id, phase, "std", s.stddev);
            row("stats_" + id, phase, "median", s.median);
            row("stats_" + id, phase, "q25", s.q25);
            row("stats_" + id, phase, "q75", s.q75);
        }
    for (const auto& [id, rms] : r.tracking_rms_C) row("tracking", "overall", id, rms);
    return os.str();
}

/// Human-readable comparison summary.
inline std::string comparison_report_text(const ComparisonReport& r) {
    std::ostringstream os;
    os << "run comparison over t* in [" << detail::fmt_g(r.t_begin) << ", "
       << detail::fmt_g(r.t_end) << "], " << r.samples << " samples\n";
    for (const ColumnComparison& c : r.columns) {
        os << "  " << c.column << ": rms " << detail::fmt_g(c.rms) << ", max "
           << detail::fmt_g(c.max_abs);
        if (c.ratio_defined)
            os << ", mean ratio (full/lab) " << detail::fmt_g(c.mean_ratio);
        os << "\n";
    }
    os << "worst thermal-mass rms: " << detail::fmt_g(r.max_thm_rms) << "\n";
    if (!r.pi_residuals.empty()) {
        os << "design-point group residuals:\n";
        for (const auto& [g, v] : r.pi_residuals)
            os << "  " << g << ": " << detail::fmt_g(v) << "\n";
    }
    return os.str();
}

/// Machine-readable comparison CSV: column,rms,max_abs,mean_full,mean_lab,mean_ratio.
inline std::string comparison_report_csv(const ComparisonReport& r) {
    std::ostringstream os;
    os << "column,rms,max_abs,mean_full,mean_lab,mean_ratio\n";
    for (const ColumnComparison& c : r.columns) {
        os << c.column << "," << c.rms << "," << c.max_abs << "," << c.mean_full << ","
           << c.mean_lab << ",";
        if (c.ratio_defined) os << c.mean_ratio;
        os << "\n";
    }
    return os.str();
}

}  // namespace dhn

#endif  // DHN_METRICS_HPP
