#ifndef DHN_MODEL_HPP
#define DHN_MODEL_HPP

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dhn/core.hpp"

namespace dhn {

/**
 * @brief Working-fluid properties, assumed constant over the simulated
 *        temperature range.
 */
struct FluidProperties {
    double rho = 1000.0;  ///< density [kg/m^3]
    double cp = 4186.0;   ///< specific heat capacity [J/(kg K)]
};

/**
 * @brief Straight pipe run between two hydraulic nodes.
 *
 * The water volume follows from the circular cross section,
 * V = pi/4 * D^2 * l.  The pressure-loss coefficient k_tot lumps friction
 * and minor losses; the drop across the run is dp = k_tot * (mdot / A_c)^2,
 * so k_tot carries the unit m^3/kg.
 */
struct PipeSegment {
    std::string id;
    std::string from;        ///< upstream node name
    std::string to;          ///< downstream node name
    double length_m = 0.0;   ///< run length [m]
    double diameter_m = 0.0; ///< inner diameter [m]
    double k_tot = 0.0;      ///< lumped pressure-loss coefficient [m^3/kg]
    double hAs_WpK = 0.0;    ///< heat-loss conductance to ambient, whole run [W/K]

    /// Flow cross section pi/4 * D^2 [m^2].
    double cross_section_m2() const { return 0.25 * kPi * diameter_m * diameter_m; }

    /// Contained water volume pi/4 * D^2 * l [m^3].
    double volume_m3() const { return cross_section_m2() * length_m; }
};

/**
 * @brief Heat source side of the network: fixed-speed pump plus a supply
 *        temperature source, with an optional buffer vessel ahead of the
 *        reheater on the return side.
 *
 * The pump imposes a constant total mass flow; the pressure rise is carried
 * as metadata so recorded pressure drops can be checked against the
 * available head.
 */
struct SupplyPlant {
    double supply_temp_C = 80.0;        ///< design supply temperature [degC]
    double mdot_kgps = 1.0;             ///< imposed total mass flow [kg/s]
    double pump_pressure_rise_Pa = 0.0; ///< available pump head [Pa], metadata
    std::string outlet_node;            ///< node fed with supply water
    std::string inlet_node;             ///< node where return water arrives
    double buffer_volume_m3 = 0.0;      ///< buffer vessel volume [m^3], 0 disables
    double buffer_hAs_WpK = 0.0;        ///< buffer heat-loss conductance [W/K]
};

/**
 * @brief Plate heat exchanger coupling the water loop to one thermal mass.
 *
 * Modelled as a single well-mixed water volume whose shell exchanges heat
 * with the owning thermal mass through the conductance hAs_WpK.
 */
struct HeatExchanger {
    std::string id;
    std::string from;          ///< upstream node name
    std::string to;            ///< downstream node name
    double volume_m3 = 0.0;    ///< water hold-up volume [m^3]
    double k_tot = 0.0;        ///< pressure-loss coefficient [m^3/kg]
    double hAs_WpK = 0.0;      ///< conductance water -> thermal mass [W/K]
    std::string thermal_mass;  ///< id of the served thermal mass
};

/**
 * @brief Optional actively controlled heat sink attached to a thermal mass.
 *
 * Injects an additional, externally commanded cooling power so a mildly
 * conditioned room can emulate a harsher design ambient.
 */
struct PeltierUnit {
    double max_power_W = 0.0;     ///< saturation limit of the sink [W]
    double tracking_tau_s = 0.0;  ///< first-order response time, 0 = instantaneous [s]
};

/**
 * @brief Lumped consumer (building / metal block) heated by one exchanger.
 *
 * Two conductances to ambient are kept: the one physically acting in the
 * plant (hAs_act) and the one the similitude design asks for (hAs_sim).
 * They coincide unless hardware constraints force a smaller actuator and an
 * active sink makes up the difference.
 */
struct ThermalMass {
    std::string id;
    double C_JpK = 0.0;                 ///< heat capacity [J/K]
    double hAs_act_WpK = 0.0;           ///< physically acting loss conductance [W/K]
    double hAs_sim_WpK = 0.0;           ///< design loss conductance [W/K]
    double setpoint_C = 0.0;            ///< nominal comfort setpoint [degC]
    std::optional<PeltierUnit> peltier; ///< active sink, if installed
};

/// Valve opening-to-area laws.
enum class ValveCharacteristic {
    linear,            ///< relative area a(u) = u
    equal_percentage,  ///< a(u) = R^(u-1) with rangeability R = 50
};

/**
 * @brief Three-way routing valve at the head of a consumer loop.
 *
 * One control signal u in [0,1] opens the user branch while closing the
 * bypass: the user side sees opening u, the bypass side 1-u.  A branch whose
 * relative area falls below sqrt(k_min/k_max) is treated as shut (no flow);
 * by construction at most one branch can be shut at a time.
 */
struct ValveModel {
    std::string id;
    std::string node;            ///< node the valve sits on
    std::string user_branch_to;  ///< first node of the user branch
    std::string bypass_branch_to;///< first node of the bypass branch
    double user_k_min = 0.0;     ///< user branch coefficient, fully open [m^3/kg]
    double user_k_max = 0.0;     ///< user branch coefficient at the shut threshold [m^3/kg]
    double bypass_k_min = 0.0;   ///< bypass coefficient, fully open [m^3/kg]
    double bypass_k_max = 0.0;   ///< bypass coefficient at the shut threshold [m^3/kg]
    ValveCharacteristic characteristic = ValveCharacteristic::equal_percentage;

    /// Rangeability of the equal-percentage law.
    static constexpr double kRangeability = 50.0;

    /** @brief Relative area of a branch given its opening fraction. */
    double relative_area(double opening) const {
        const double u = clamp(opening, 0.0, 1.0);
        switch (characteristic) {
            case ValveCharacteristic::linear: return u;
            case ValveCharacteristic::equal_percentage:
                return std::pow(kRangeability, u - 1.0);
        }
        return u;
    }

    /**
     * @brief Branch loss coefficient for relative area @p a, or infinity when
     *        the branch is below its shut threshold.
     */
    static double branch_k(double a, double k_min, double k_max) {
        const double a_shut = std::sqrt(k_min / k_max);
        if (a <= a_shut) return std::numeric_limits<double>::infinity();
        return k_min / (a * a);
    }

    /// Loss coefficient of the user branch at control signal u.
    double user_k(double u) const { return branch_k(relative_area(u), user_k_min, user_k_max); }

    /// Loss coefficient of the bypass branch at control signal u.
    double bypass_k(double u) const {
        return branch_k(relative_area(1.0 - u), bypass_k_min, bypass_k_max);
    }
};

/**
 * @brief Complete plant description: fluid, source, piping, valves,
 *        exchangers and consumers.
 *
 * The expected topology is a tree of parallel consumer loops: a supply main
 * from the plant outlet to a split node, one leg per loop ending in a
 * three-way valve whose user branch holds exactly one heat exchanger and
 * whose bypass is plain pipe, both branches re-merging before the return
 * leg, all loops joining into a common return main back to the plant.  A
 * single loop may omit the split/join.
 */
struct NetworkModel {
    std::string name;  ///< free-form label used in reports
    FluidProperties fluid;
    SupplyPlant plant;
    std::vector<PipeSegment> segments;
    std::vector<ValveModel> valves;
    std::vector<HeatExchanger> heat_exchangers;
    std::vector<ThermalMass> thermal_masses;

    const ThermalMass& mass_by_id(const std::string& id) const {
        for (const auto& m : thermal_masses)
            if (m.id == id) return m;
        throw std::invalid_argument("unknown thermal mass '" + id + "'");
    }

    ThermalMass& mass_by_id(const std::string& id) {
        for (auto& m : thermal_masses)
            if (m.id == id) return m;
        throw std::invalid_argument("unknown thermal mass '" + id + "'");
    }
};

/**
 * @brief One consumer loop as discovered by topology analysis.
 *
 * All members index into the owning NetworkModel.
 */
struct LoopTopology {
    std::vector<std::size_t> supply_leg;   ///< segments from split node to valve
    std::size_t valve = 0;                 ///< valve index
    std::vector<std::size_t> user_before;  ///< user-branch segments upstream of the exchanger
    std::size_t exchanger = 0;             ///< heat-exchanger index
    std::vector<std::size_t> user_after;   ///< user-branch segments downstream of the exchanger
    std::vector<std::size_t> bypass;       ///< bypass-branch segments
    std::string merge_node;                ///< node where the branches re-merge
    std::vector<std::size_t> return_leg;   ///< segments from merge node to the join node
};

/**
 * @brief Flow-ordered view of a network, produced by analyze_topology().
 */
struct NetworkTopology {
    std::vector<std::size_t> supply_main;  ///< segments plant outlet -> split node
    std::string split_node;                ///< node where loops branch off
    std::vector<LoopTopology> loops;       ///< one entry per consumer loop
    std::string join_node;                 ///< node where loops rejoin
    std::vector<std::size_t> return_main;  ///< segments join node -> plant inlet
};

/**
 * @brief Structural findings for a model; empty means the model is usable.
 */
struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }

    std::string to_string() const {
        std::ostringstream os;
        for (const auto& v : violations) os << v << '\n';
        return os.str();
    }
};

namespace detail {

/// Outgoing element at a node: pipe segment or heat exchanger.
struct Outgoing {
    bool is_segment = true;
    std::size_t index = 0;
};

struct NodeMaps {
    std::map<std::string, std::vector<Outgoing>> out;
    std::map<std::string, int> indegree;
    std::map<std::string, std::size_t> valve_at;  ///< node name -> valve index
};

inline NodeMaps build_node_maps(const NetworkModel& m) {
    NodeMaps nm;
    for (std::size_t i = 0; i < m.segments.size(); ++i) {
        nm.out[m.segments[i].from].push_back({true, i});
        ++nm.indegree[m.segments[i].to];
    }
    for (std::size_t i = 0; i < m.heat_exchangers.size(); ++i) {
        nm.out[m.heat_exchangers[i].from].push_back({false, i});
        ++nm.indegree[m.heat_exchangers[i].to];
    }
    for (std::size_t i = 0; i < m.valves.size(); ++i) nm.valve_at[m.valves[i].node] = i;
    return nm;
}

}  // namespace detail

/**
 * @brief Check scalar parameters and id/node hygiene of a model.
 *
 * Topological structure is checked by analyze_topology(); validate_network()
 * runs both and merges the findings.
 */
inline ValidationReport validate_parameters(const NetworkModel& m) {
    ValidationReport r;
    auto bad = [&r](const std::string& msg) { r.violations.push_back(msg); };

    if (!(m.fluid.rho > 0.0)) bad("fluid density must be positive");
    if (!(m.fluid.cp > 0.0)) bad("fluid heat capacity must be positive");
    if (!(m.plant.mdot_kgps > 0.0)) bad("plant mass flow must be positive");
    if (m.plant.pump_pressure_rise_Pa < 0.0) bad("pump pressure rise must be non-negative");
    if (m.plant.outlet_node.empty()) bad("plant outlet node is not set");
    if (m.plant.inlet_node.empty()) bad("plant inlet node is not set");
    if (m.plant.outlet_node == m.plant.inlet_node)
        bad("plant outlet and inlet must be distinct nodes");
    if (m.plant.buffer_volume_m3 < 0.0) bad("buffer volume must be non-negative");
    if (m.plant.buffer_hAs_WpK < 0.0) bad("buffer heat-loss conductance must be non-negative");
    if (m.plant.buffer_hAs_WpK > 0.0 && m.plant.buffer_volume_m3 <= 0.0)
        bad("buffer heat loss given but buffer volume is zero");

    std::set<std::string> ids;
    auto check_id = [&](const std::string& id, const char* kind) {
        if (id.empty()) bad(std::string(kind) + " with empty id");
        else if (!ids.insert(id).second) bad("duplicate element id '" + id + "'");
    };

    for (const auto& s : m.segments) {
        check_id(s.id, "pipe segment");
        const std::string tag = "segment '" + s.id + "': ";
        if (!(s.length_m > 0.0)) bad(tag + "length must be positive");
        if (!(s.diameter_m > 0.0)) bad(tag + "diameter must be positive");
        if (s.k_tot < 0.0) bad(tag + "pressure-loss coefficient must be non-negative");
        if (s.hAs_WpK < 0.0) bad(tag + "heat-loss conductance must be non-negative");
        if (s.from.empty() || s.to.empty()) bad(tag + "both end nodes must be named");
        if (s.from == s.to) bad(tag + "cannot start and end on the same node");
    }
    for (const auto& h : m.heat_exchangers) {
        check_id(h.id, "heat exchanger");
        const std::string tag = "heat exchanger '" + h.id + "': ";
        if (!(h.volume_m3 > 0.0)) bad(tag + "water volume must be positive");
        if (h.k_tot < 0.0) bad(tag + "pressure-loss coefficient must be non-negative");
        if (!(h.hAs_WpK > 0.0)) bad(tag + "coupling conductance must be positive");
        if (h.from.empty() || h.to.empty()) bad(tag + "both end nodes must be named");
        bool found = false;
        for (const auto& tm : m.thermal_masses) found = found || tm.id == h.thermal_mass;
        if (!found) bad(tag + "unknown thermal mass '" + h.thermal_mass + "'");
    }
    for (const auto& v : m.valves) {
        check_id(v.id, "valve");
        const std::string tag = "valve '" + v.id + "': ";
        if (v.node.empty()) bad(tag + "node must be named");
        if (v.user_branch_to.empty() || v.bypass_branch_to.empty())
            bad(tag + "both branch target nodes must be named");
        if (v.user_branch_to == v.bypass_branch_to)
            bad(tag + "branch targets must be distinct nodes");
        auto check_range = [&](double kmin, double kmax, const char* side) {
            if (!(kmin > 0.0) || !(kmax > 0.0))
                bad(tag + std::string(side) + " loss coefficients must be positive");
            else if (!(kmax >= kmin))
                bad(tag + std::string(side) + " k_max must be >= k_min");
        };
        check_range(v.user_k_min, v.user_k_max, "user");
        check_range(v.bypass_k_min, v.bypass_k_max, "bypass");
        if (v.user_k_min > 0.0 && v.user_k_max >= v.user_k_min && v.bypass_k_min > 0.0 &&
            v.bypass_k_max >= v.bypass_k_min) {
            // Guard the one-branch-always-open invariant: openings where both
            // relative areas sit below their shut thresholds must not exist.
            const double su = std::sqrt(v.user_k_min / v.user_k_max);
            const double sb = std::sqrt(v.bypass_k_min / v.bypass_k_max);
            const bool overlap = v.characteristic == ValveCharacteristic::linear
                                     ? su + sb >= 1.0
                                     : ValveModel::kRangeability * su * sb >= 1.0;
            if (overlap)
                bad(tag +
                    "branch shut thresholds overlap, both branches could close at once; "
                    "widen the k_min..k_max spans");
        }
    }
    std::set<std::string> served;
    for (const auto& h : m.heat_exchangers)
        if (!served.insert(h.thermal_mass).second)
            bad("thermal mass '" + h.thermal_mass + "' is served by more than one exchanger");
    for (const auto& tm : m.thermal_masses) {
        check_id(tm.id, "thermal mass");
        const std::string tag = "thermal mass '" + tm.id + "': ";
        if (!(tm.C_JpK > 0.0)) bad(tag + "heat capacity must be positive");
        if (tm.hAs_act_WpK < 0.0) bad(tag + "acting loss conductance must be non-negative");
        if (tm.hAs_sim_WpK < 0.0) bad(tag + "design loss conductance must be non-negative");
        if (tm.peltier && tm.peltier->max_power_W < 0.0)
            bad(tag + "active sink limit must be non-negative");
        if (tm.peltier && tm.peltier->tracking_tau_s < 0.0)
            bad(tag + "active sink response time must be non-negative");
        if (!served.count(tm.id)) bad(tag + "not served by any heat exchanger");
    }
    return r;
}

/**
 * @brief Discover the flow-ordered structure of a network.
 *
 * @throws validation_error when the element graph is not a tree of parallel
 *         consumer loops as described on NetworkModel.
 */
inline NetworkTopology analyze_topology(const NetworkModel& m) {
    using detail::Outgoing;
    auto nm = detail::build_node_maps(m);
    NetworkTopology topo;

    std::vector<bool> seg_used(m.segments.size(), false);
    std::vector<bool> hx_used(m.heat_exchangers.size(), false);
    std::vector<bool> valve_used(m.valves.size(), false);

    auto fail = [](const std::string& msg) { throw validation_error(msg); };

    auto outdeg = [&](const std::string& node) -> std::size_t {
        auto it = nm.out.find(node);
        return it == nm.out.end() ? 0 : it->second.size();
    };
    auto indeg = [&](const std::string& node) -> int {
        auto it = nm.indegree.find(node);
        return it == nm.indegree.end() ? 0 : it->second;
    };

    // Follow a chain of pipe segments starting at `node` until a stopping
    // node is reached: a valve seat, a branch/merge/join point, or the plant
    // inlet.  Junctions count only on arrival, so a walk may start on one.
    auto follow_chain = [&](std::string node, const char* where,
                            std::vector<std::size_t>& out_segments) -> std::string {
        bool moved = false;
        for (;;) {
            if (node == m.plant.inlet_node) return node;
            if (nm.valve_at.count(node)) return node;
            if (moved && indeg(node) >= 2) return node;
            const std::size_t deg = outdeg(node);
            if (deg == 0)
                fail(std::string(where) + ": dead end at node '" + node + "'");
            if (deg > 1) return node;  // split point, caller decides
            const Outgoing& o = nm.out.at(node).front();
            if (!o.is_segment)
                fail(std::string(where) + ": heat exchanger '" + m.heat_exchangers[o.index].id +
                     "' may only appear inside a user branch");
            if (seg_used[o.index])
                fail(std::string(where) + ": segment '" + m.segments[o.index].id +
                     "' is traversed twice; the network must be loop-free outside valve branches");
            seg_used[o.index] = true;
            out_segments.push_back(o.index);
            node = m.segments[o.index].to;
            moved = true;
            if (out_segments.size() > m.segments.size())
                fail(std::string(where) + ": pipe chain does not terminate");
        }
    };

    // Walk one valve branch until the first node with indegree >= 2 (the
    // merge point).  Collects pipe segments and at most one exchanger.
    auto follow_branch = [&](std::string node, const std::string& valve_id, bool user_side,
                             std::vector<std::size_t>& before,
                             std::optional<std::size_t>& hx,
                             std::vector<std::size_t>& after) -> std::string {
        const std::string where =
            "valve '" + valve_id + "' " + (user_side ? "user" : "bypass") + " branch";
        std::size_t steps = 0;
        for (;;) {
            if (indeg(node) >= 2) return node;  // merge point reached
            if (node == m.plant.inlet_node)
                fail(where + ": reaches the plant inlet without re-merging");
            if (nm.valve_at.count(node)) fail(where + ": nested valves are not supported");
            const std::size_t deg = outdeg(node);
            if (deg == 0) fail(where + ": dead end at node '" + node + "'");
            if (deg > 1) fail(where + ": branches may not split again (node '" + node + "')");
            const Outgoing& o = nm.out.at(node).front();
            if (o.is_segment) {
                if (seg_used[o.index])
                    fail(where + ": segment '" + m.segments[o.index].id + "' is traversed twice");
                seg_used[o.index] = true;
                (hx ? after : before).push_back(o.index);
                node = m.segments[o.index].to;
            } else {
                if (!user_side)
                    fail(where + ": heat exchanger '" + m.heat_exchangers[o.index].id +
                         "' is not allowed in a bypass");
                if (hx)
                    fail(where + ": more than one heat exchanger in series");
                if (hx_used[o.index])
                    fail(where + ": heat exchanger '" + m.heat_exchangers[o.index].id +
                         "' is traversed twice");
                hx_used[o.index] = true;
                hx = o.index;
                node = m.heat_exchangers[o.index].to;
            }
            if (++steps > m.segments.size() + m.heat_exchangers.size())
                fail(where + ": does not terminate");
        }
    };

    if (m.valves.empty()) fail("network has no consumer loop (no valves)");
    if (m.heat_exchangers.empty()) fail("network has no heat exchanger");

    topo.split_node = follow_chain(m.plant.outlet_node, "supply main", topo.supply_main);
    if (topo.split_node == m.plant.inlet_node)
        fail("supply main reaches the plant inlet without passing any consumer loop");

    // Loop heads: either the split node fans out into per-loop legs, or it
    // carries a valve directly (single-loop network without a split).
    std::vector<std::string> leg_heads;
    if (nm.valve_at.count(topo.split_node)) {
        leg_heads.push_back(topo.split_node);
    } else {
        const auto& outs = nm.out.at(topo.split_node);
        for (const auto& o : outs) {
            if (!o.is_segment)
                fail("loop legs must start with pipe segments (node '" + topo.split_node + "')");
        }
        if (outs.size() < 2)
            fail("split node '" + topo.split_node + "' fans out into fewer than two legs");
        leg_heads.resize(outs.size(), topo.split_node);
    }

    std::string join;
    for (std::size_t li = 0; li < leg_heads.size(); ++li) {
        LoopTopology loop;
        std::string node = leg_heads[li];
        if (!nm.valve_at.count(node)) {
            // Dedicated leg: consume exactly the li-th outgoing segment first.
            const Outgoing& o = nm.out.at(topo.split_node)[li];
            seg_used[o.index] = true;
            loop.supply_leg.push_back(o.index);
            node = m.segments[o.index].to;
            node = follow_chain(node, "loop supply leg", loop.supply_leg);
            if (!nm.valve_at.count(node))
                fail("loop supply leg ends at node '" + node + "' which has no valve");
        }
        loop.valve = nm.valve_at.at(node);
        if (valve_used[loop.valve]) fail("valve '" + m.valves[loop.valve].id + "' feeds two loops");
        valve_used[loop.valve] = true;
        const ValveModel& v = m.valves[loop.valve];

        std::optional<std::size_t> hx;
        const std::string mu = follow_branch(v.user_branch_to, v.id, true,
                                             loop.user_before, hx, loop.user_after);
        if (!hx) fail("valve '" + v.id + "' user branch holds no heat exchanger");
        loop.exchanger = *hx;
        std::optional<std::size_t> no_hx;
        std::vector<std::size_t> unused;
        const std::string mb =
            follow_branch(v.bypass_branch_to, v.id, false, loop.bypass, no_hx, unused);
        if (mu != mb)
            fail("valve '" + v.id + "' branches do not re-merge (user ends at '" + mu +
                 "', bypass at '" + mb + "')");
        loop.merge_node = mu;

        std::string end = follow_chain(loop.merge_node, "loop return leg", loop.return_leg);
        if (nm.valve_at.count(end) && end != m.plant.inlet_node)
            fail("loop return leg runs into valve node '" + end + "'");
        if (join.empty()) join = end;
        else if (join != end)
            fail("loops join at different nodes ('" + join + "' vs '" + end + "')");
        topo.loops.push_back(std::move(loop));
    }
    topo.join_node = join;

    if (topo.join_node == m.plant.inlet_node) {
        // Single loop may run straight into the plant inlet.
        if (topo.loops.size() > 1)
            fail("multiple loops must re-join before the plant inlet");
    } else {
        const std::string end = follow_chain(topo.join_node, "return main", topo.return_main);
        if (end != m.plant.inlet_node)
            fail("return main ends at '" + end + "' instead of the plant inlet");
    }

    for (std::size_t i = 0; i < m.segments.size(); ++i)
        if (!seg_used[i])
            fail("segment '" + m.segments[i].id + "' is not reachable from the plant outlet");
    for (std::size_t i = 0; i < m.heat_exchangers.size(); ++i)
        if (!hx_used[i])
            fail("heat exchanger '" + m.heat_exchangers[i].id + "' is not reachable");
    for (std::size_t i = 0; i < m.valves.size(); ++i)
        if (!valve_used[i]) fail("valve '" + m.valves[i].id + "' is not part of any loop");

    return topo;
}

/**
 * @brief Full structural validation: parameter checks plus topology analysis.
 */
inline ValidationReport validate_network(const NetworkModel& m) {
    ValidationReport r = validate_parameters(m);
    if (!r.ok()) return r;  // topology analysis needs sane parameters
    try {
        analyze_topology(m);
    } catch (const validation_error& e) {
        r.violations.push_back(e.what());
    }
    return r;
}

/**
 * @brief One comfort window: between start and end the mass tracks the
 *        heating setpoint; outside its windows it tracks the cooling
 *        setpoint.  Boundaries are right-continuous: t == start is inside,
 *        t == end is outside.
 */
struct OccupancyWindow {
    double start_s = 0.0;        ///< window start [s]
    double end_s = 0.0;          ///< window end [s]
    double heating_setpoint_C = 0.0;  ///< tracked while inside [degC]
    double cooling_setpoint_C = 0.0;  ///< tracked after this window ends [degC]
};

/**
 * @brief PID controller settings for one consumer valve.
 */
struct PidConfig {
    double kp = 0.0;            ///< proportional gain [1/K]
    double ki = 0.0;            ///< integral gain [1/(K s)]
    double kd = 0.0;            ///< derivative gain [s/K]
    double sample_time_s = 0.0; ///< controller period, 0 = one output interval [s]
    double u_min = 0.0;         ///< lower output clamp
    double u_max = 1.0;         ///< upper output clamp
};

/// How the initial temperature field is chosen.
enum class InitMode {
    steady,   ///< algebraic steady state at the initial operating point
    ambient,  ///< everything starts at the ambient temperature
};

/**
 * @brief Everything that defines one simulation run on a given network.
 */
struct ExperimentScenario {
    double duration_s = 0.0;         ///< simulated span [s]
    double output_interval_s = 10.0; ///< trajectory sampling period [s]
    double dt_s = 0.0;               ///< integrator step, 0 = automatic [s]
    int subsegments = 4;             ///< well-mixed volumes per pipe segment
    InitMode init = InitMode::steady;
    unsigned seed = 0;               ///< reserved for randomized studies

    PiecewiseLinear ambient_C{20.0};   ///< shared ambient temperature [degC]
    PiecewiseLinear supply_temp_C;     ///< overrides the plant value when set [degC]

    /// Ambient the emulated full-scale plant would see, for active sinks [degC].
    PiecewiseLinear emulate_ambient_full_C;
    /// Setpoint of the emulated full-scale plant, for active sinks [degC].
    double emulate_setpoint_full_C = 0.0;
    /// Scale factor between emulated and local setpoint deviations.
    double emulate_k_T = 0.0;

    /// Fixed valve schedules, by valve id; overrides closed-loop control.
    std::map<std::string, PiecewiseLinear> valve_schedules;
    /// Comfort windows per thermal mass id.
    std::map<std::string, std::vector<OccupancyWindow>> windows;
    /// Cooling setpoint used before any window has ended [degC].
    std::map<std::string, double> default_cooling_setpoint_C;
    /// Controller settings: "" key = defaults, others override per mass id.
    std::map<std::string, PidConfig> controllers;
    /// Hold time within the comfort band before a mass counts as settled [s].
    double steady_hold_s = 600.0;
};

/**
 * @brief Setpoint the controller of @p mass_id tracks at time @p t.
 *
 * Windows are evaluated right-continuously; outside every window the cooling
 * setpoint of the most recently ended window applies (before the first
 * window ends: the scenario default, which itself defaults to 0 degC).
 */
inline double active_setpoint(const ExperimentScenario& sc, const std::string& mass_id,
                              double t, bool* heating = nullptr) {
    double cooling = 0.0;
    auto dit = sc.default_cooling_setpoint_C.find(mass_id);
    if (dit != sc.default_cooling_setpoint_C.end()) cooling = dit->second;
    if (heating) *heating = false;
    auto wit = sc.windows.find(mass_id);
    if (wit == sc.windows.end()) return cooling;
    double last_end = -std::numeric_limits<double>::infinity();
    for (const auto& w : wit->second) {
        if (t >= w.start_s && t < w.end_s) {
            if (heating) *heating = true;
            return w.heating_setpoint_C;
        }
        if (w.end_s <= t && w.end_s > last_end) {
            last_end = w.end_s;
            cooling = w.cooling_setpoint_C;
        }
    }
    return cooling;
}

/**
 * @brief Scenario sanity checks against a model.
 */
inline ValidationReport validate_scenario(const ExperimentScenario& sc, const NetworkModel& m) {
    ValidationReport r;
    auto bad = [&r](const std::string& msg) { r.violations.push_back(msg); };
    // Zero is allowed: it records the initial state as a single-row run.
    if (sc.duration_s < 0.0) bad("scenario duration must be non-negative");
    if (!(sc.output_interval_s > 0.0)) bad("output interval must be positive");
    if (sc.dt_s < 0.0) bad("integrator step must be non-negative");
    if (sc.dt_s > 0.0 && sc.dt_s > sc.output_interval_s + kTimeEps)
        bad("integrator step cannot exceed the output interval");
    if (sc.subsegments < 1) bad("pipe subdivision count must be at least 1");
    if (sc.steady_hold_s < 0.0) bad("steady hold time must be non-negative");
    if (sc.ambient_C.empty()) bad("ambient temperature profile is empty");

    for (const auto& [id, sched] : sc.valve_schedules) {
        bool found = false;
        for (const auto& v : m.valves) found = found || v.id == id;
        if (!found) bad("valve schedule for unknown valve '" + id + "'");
        if (sched.empty()) bad("valve schedule for '" + id + "' is empty");
        else
            for (const auto& p : sched.points())
                if (p.second < 0.0 || p.second > 1.0)
                    bad("valve schedule for '" + id + "' leaves [0,1]");
    }
    for (const auto& [id, ws] : sc.windows) {
        bool found = false;
        for (const auto& tm : m.thermal_masses) found = found || tm.id == id;
        if (!found) bad("comfort windows for unknown thermal mass '" + id + "'");
        for (std::size_t i = 0; i < ws.size(); ++i) {
            if (!(ws[i].end_s > ws[i].start_s))
                bad("window " + std::to_string(i) + " for '" + id + "' has non-positive length");
            if (i > 0 && ws[i].start_s < ws[i - 1].end_s - kTimeEps)
                bad("windows for '" + id + "' overlap or are unsorted");
        }
    }
    for (const auto& [id, cfg] : sc.controllers) {
        if (!id.empty()) {
            bool found = false;
            for (const auto& tm : m.thermal_masses) found = found || tm.id == id;
            if (!found) bad("controller settings for unknown thermal mass '" + id + "'");
        }
        if (cfg.sample_time_s < 0.0) bad("controller sample time must be non-negative");
        if (!(cfg.u_max > cfg.u_min)) bad("controller clamp range is empty");
    }
    for (const auto& [id, v] : sc.default_cooling_setpoint_C) {
        (void)v;
        bool found = false;
        for (const auto& tm : m.thermal_masses) found = found || tm.id == id;
        if (!found) bad("cooling setpoint for unknown thermal mass '" + id + "'");
    }
    return r;
}

}  // namespace dhn

#endif  // DHN_MODEL_HPP
