#ifndef DHN_TESTS_FIXTURES_HPP
#define DHN_TESTS_FIXTURES_HPP

#include "dhn/model.hpp"

namespace dhn::testing {

/**
 * @brief Bench-scale network with two consumer loops, used across the suite.
 *
 * plant -- sup_a --> ns --+-- leg1 --> nv1 [v1] ==user/bypass==> nm1 -- ret1 --+
 *                         |                                                    v
 *                         +-- leg2 --> nv2 [v2] ==user/bypass==> nm2 -- ret2 --> nj -- ret_m --> plant
 */
inline NetworkModel two_loop_model() {
    NetworkModel m;
    m.name = "bench2";
    m.fluid.rho = 994.0;
    m.fluid.cp = 4183.0;
    m.plant.supply_temp_C = 51.5;
    m.plant.mdot_kgps = 0.0862;
    m.plant.pump_pressure_rise_Pa = 75000.0;
    m.plant.outlet_node = "po";
    m.plant.inlet_node = "pi";
    m.plant.buffer_volume_m3 = 5e-4;
    m.plant.buffer_hAs_WpK = 0.1;

    auto seg = [&](const char* id, const char* from, const char* to, double l, double d,
                   double k, double hAs) {
        PipeSegment s;
        s.id = id;
        s.from = from;
        s.to = to;
        s.length_m = l;
        s.diameter_m = d;
        s.k_tot = k;
        s.hAs_WpK = hAs;
        m.segments.push_back(s);
    };
    const double D = 0.012;
    seg("sup_a", "po", "ns", 6.0, D, 0.01, 0.10);
    seg("leg1", "ns", "nv1", 2.0, D, 0.005, 0.04);
    seg("u1a", "nu1", "nhx1", 1.0, D, 0.005, 0.02);
    seg("u1b", "nhx1b", "nm1", 1.0, D, 0.005, 0.02);
    seg("byp1", "nb1", "nm1", 1.8, D, 0.005, 0.03);
    seg("ret1", "nm1", "nj", 2.0, D, 0.005, 0.04);
    seg("leg2", "ns", "nv2", 2.0, D, 0.005, 0.04);
    seg("u2a", "nu2", "nhx2", 1.0, D, 0.005, 0.02);
    seg("u2b", "nhx2b", "nm2", 1.0, D, 0.005, 0.02);
    seg("byp2", "nb2", "nm2", 1.8, D, 0.005, 0.03);
    seg("ret2", "nm2", "nj", 2.0, D, 0.005, 0.04);
    seg("ret_m", "nj", "pi", 6.0, D, 0.01, 0.10);

    auto valve = [&](const char* id, const char* node, const char* user_to,
                     const char* bypass_to) {
        ValveModel v;
        v.id = id;
        v.node = node;
        v.user_branch_to = user_to;
        v.bypass_branch_to = bypass_to;
        // k_max = 2500 * k_min puts the shut threshold exactly at the
        // equal-percentage end-of-travel area 1/50, so each branch seats at
        // its travel end and is open everywhere else.
        v.user_k_min = 0.02;
        v.user_k_max = 50.0;
        v.bypass_k_min = 0.02;
        v.bypass_k_max = 50.0;
        v.characteristic = ValveCharacteristic::equal_percentage;
        m.valves.push_back(v);
    };
    valve("v1", "nv1", "nu1", "nb1");
    valve("v2", "nv2", "nu2", "nb2");

    auto hx = [&](const char* id, const char* from, const char* to, const char* tm,
                  double hAs) {
        HeatExchanger h;
        h.id = id;
        h.from = from;
        h.to = to;
        h.volume_m3 = 8e-4;
        h.k_tot = 0.2;
        h.hAs_WpK = hAs;
        h.thermal_mass = tm;
        m.heat_exchangers.push_back(h);
    };
    hx("hx1", "nhx1", "nhx1b", "tm1", 14.5);
    hx("hx2", "nhx2", "nhx2b", "tm2", 16.0);

    ThermalMass t1;
    t1.id = "tm1";
    t1.C_JpK = 30000.0;
    t1.hAs_act_WpK = 0.35;
    t1.hAs_sim_WpK = 0.45;
    t1.setpoint_C = 28.0;
    t1.peltier = PeltierUnit{5.0, 0.0};
    m.thermal_masses.push_back(t1);

    ThermalMass t2;
    t2.id = "tm2";
    t2.C_JpK = 43500.0;
    t2.hAs_act_WpK = 0.50;
    t2.hAs_sim_WpK = 0.60;
    t2.setpoint_C = 28.0;
    m.thermal_masses.push_back(t2);
    return m;
}

/** @brief Matching scenario exercising profiles, windows and controllers. */
inline ExperimentScenario bench_scenario() {
    ExperimentScenario sc;
    sc.duration_s = 3600.0;
    sc.output_interval_s = 10.0;
    sc.dt_s = 0.25;
    sc.subsegments = 2;
    sc.init = InitMode::steady;
    sc.ambient_C = PiecewiseLinear(21.0);
    sc.windows["tm1"] = {{600.0, 1800.0, 28.0, 0.0}, {2400.0, 3000.0, 29.0, 1.0}};
    sc.windows["tm2"] = {{600.0, 1800.0, 28.0, 0.0}};
    sc.default_cooling_setpoint_C["tm1"] = 0.0;
    sc.default_cooling_setpoint_C["tm2"] = 0.0;
    PidConfig base;
    base.kp = 0.05;
    base.ki = 1e-3;
    base.kd = 0.0;
    base.sample_time_s = 10.0;
    sc.controllers[""] = base;
    PidConfig c2 = base;
    c2.u_max = 0.33;
    sc.controllers["tm2"] = c2;
    return sc;
}

/** @brief Single-loop network whose valve sits directly on the supply main. */
inline NetworkModel one_loop_model() {
    NetworkModel m = two_loop_model();
    m.name = "bench1";
    // Drop loop 2 and the split: supply main runs straight to the valve.
    auto drop_seg = [&](const char* id) {
        std::erase_if(m.segments, [&](const PipeSegment& s) { return s.id == id; });
    };
    for (const char* id : {"leg1", "leg2", "u2a", "u2b", "byp2", "ret2"}) drop_seg(id);
    std::erase_if(m.valves, [](const ValveModel& v) { return v.id == "v2"; });
    std::erase_if(m.heat_exchangers, [](const HeatExchanger& h) { return h.id == "hx2"; });
    std::erase_if(m.thermal_masses, [](const ThermalMass& t) { return t.id == "tm2"; });
    // Re-point the supply main at the valve node and the return leg at the plant.
    for (auto& s : m.segments) {
        if (s.id == "sup_a") s.to = "nv1";
        if (s.id == "ret1") s.to = "nj";
    }
    for (auto& v : m.valves) v.node = "nv1";
    return m;
}

}  // namespace dhn::testing

#endif  // DHN_TESTS_FIXTURES_HPP
