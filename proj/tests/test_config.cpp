#include <catch2/catch_amalgamated.hpp>

#include "dhn/config.hpp"
#include "fixtures.hpp"

using namespace dhn;

namespace {

void check_models_equal(const NetworkModel& a, const NetworkModel& b) {
    CHECK(a.name == b.name);
    CHECK(a.fluid.rho == b.fluid.rho);
    CHECK(a.fluid.cp == b.fluid.cp);
    CHECK(a.plant.supply_temp_C == b.plant.supply_temp_C);
    CHECK(a.plant.mdot_kgps == b.plant.mdot_kgps);
    CHECK(a.plant.pump_pressure_rise_Pa == b.plant.pump_pressure_rise_Pa);
    CHECK(a.plant.outlet_node == b.plant.outlet_node);
    CHECK(a.plant.inlet_node == b.plant.inlet_node);
    CHECK(a.plant.buffer_volume_m3 == b.plant.buffer_volume_m3);
    CHECK(a.plant.buffer_hAs_WpK == b.plant.buffer_hAs_WpK);
    REQUIRE(a.segments.size() == b.segments.size());
    for (std::size_t i = 0; i < a.segments.size(); ++i) {
        CAPTURE(i);
        CHECK(a.segments[i].id == b.segments[i].id);
        CHECK(a.segments[i].from == b.segments[i].from);
        CHECK(a.segments[i].to == b.segments[i].to);
        CHECK(a.segments[i].length_m == b.segments[i].length_m);
        CHECK(a.segments[i].diameter_m == b.segments[i].diameter_m);
        CHECK(a.segments[i].k_tot == b.segments[i].k_tot);
        CHECK(a.segments[i].hAs_WpK == b.segments[i].hAs_WpK);
    }
    REQUIRE(a.valves.size() == b.valves.size());
    for (std::size_t i = 0; i < a.valves.size(); ++i) {
        CAPTURE(i);
        CHECK(a.valves[i].id == b.valves[i].id);
        CHECK(a.valves[i].node == b.valves[i].node);
        CHECK(a.valves[i].user_branch_to == b.valves[i].user_branch_to);
        CHECK(a.valves[i].bypass_branch_to == b.valves[i].bypass_branch_to);
        CHECK(a.valves[i].user_k_min == b.valves[i].user_k_min);
        CHECK(a.valves[i].user_k_max == b.valves[i].user_k_max);
        CHECK(a.valves[i].bypass_k_min == b.valves[i].bypass_k_min);
        CHECK(a.valves[i].bypass_k_max == b.valves[i].bypass_k_max);
        CHECK(a.valves[i].characteristic == b.valves[i].characteristic);
    }
    REQUIRE(a.heat_exchangers.size() == b.heat_exchangers.size());
    for (std::size_t i = 0; i < a.heat_exchangers.size(); ++i) {
        CAPTURE(i);
        CHECK(a.heat_exchangers[i].id == b.heat_exchangers[i].id);
        CHECK(a.heat_exchangers[i].from == b.heat_exchangers[i].from);
        CHECK(a.heat_exchangers[i].to == b.heat_exchangers[i].to);
        CHECK(a.heat_exchangers[i].volume_m3 == b.heat_exchangers[i].volume_m3);
        CHECK(a.heat_exchangers[i].k_tot == b.heat_exchangers[i].k_tot);
        CHECK(a.heat_exchangers[i].hAs_WpK == b.heat_exchangers[i].hAs_WpK);
        CHECK(a.heat_exchangers[i].thermal_mass == b.heat_exchangers[i].thermal_mass);
    }
    REQUIRE(a.thermal_masses.size() == b.thermal_masses.size());
    for (std::size_t i = 0; i < a.thermal_masses.size(); ++i) {
        CAPTURE(i);
        CHECK(a.thermal_masses[i].id == b.thermal_masses[i].id);
        CHECK(a.thermal_masses[i].C_JpK == b.thermal_masses[i].C_JpK);
        CHECK(a.thermal_masses[i].hAs_act_WpK == b.thermal_masses[i].hAs_act_WpK);
        CHECK(a.thermal_masses[i].hAs_sim_WpK == b.thermal_masses[i].hAs_sim_WpK);
        CHECK(a.thermal_masses[i].setpoint_C == b.thermal_masses[i].setpoint_C);
        REQUIRE(a.thermal_masses[i].peltier.has_value() == b.thermal_masses[i].peltier.has_value());
        if (a.thermal_masses[i].peltier) {
            CHECK(a.thermal_masses[i].peltier->max_power_W ==
                  b.thermal_masses[i].peltier->max_power_W);
            CHECK(a.thermal_masses[i].peltier->tracking_tau_s ==
                  b.thermal_masses[i].peltier->tracking_tau_s);
        }
    }
}

}  // namespace

TEST_CASE("model round-trips through config text exactly") {
    const NetworkModel m = dhn::testing::two_loop_model();
    const std::string text = write_model_config(m);
    const NetworkModel back = model_from_config(parse_config(text, "roundtrip.cfg"));
    check_models_equal(m, back);
    REQUIRE(validate_network(back).ok());
}

TEST_CASE("awkward but exact double values survive the round trip") {
    NetworkModel m = dhn::testing::two_loop_model();
    m.fluid.rho = 971.79999999999995;
    m.segments[0].k_tot = 1.0 / 3.0;
    m.segments[0].hAs_WpK = 6.02e23;
    m.thermal_masses[0].C_JpK = 0.15e9;
    const NetworkModel back =
        model_from_config(parse_config(write_model_config(m), "awkward.cfg"));
    CHECK(back.fluid.rho == m.fluid.rho);
    CHECK(back.segments[0].k_tot == m.segments[0].k_tot);
    CHECK(back.segments[0].hAs_WpK == m.segments[0].hAs_WpK);
    CHECK(back.thermal_masses[0].C_JpK == m.thermal_masses[0].C_JpK);
}

TEST_CASE("scenario round-trips through config text") {
    ExperimentScenario sc = dhn::testing::bench_scenario();
    sc.supply_temp_C = PiecewiseLinear({{0.0, 51.5}, {600.0, 53.0}, {1200.0, 51.5}});
    sc.emulate_ambient_full_C = PiecewiseLinear({{0.0, -5.0}, {3600.0, 2.0}});
    sc.emulate_setpoint_full_C = 20.0;
    sc.emulate_k_T = 0.45;
    sc.valve_schedules["v1"] = PiecewiseLinear({{0.0, 0.2}, {1800.0, 0.8}});
    sc.seed = 42;

    const ExperimentScenario back =
        scenario_from_config(parse_config(write_scenario_config(sc), "sc.cfg"));
    CHECK(back.duration_s == sc.duration_s);
    CHECK(back.output_interval_s == sc.output_interval_s);
    CHECK(back.dt_s == sc.dt_s);
    CHECK(back.subsegments == sc.subsegments);
    CHECK(back.seed == sc.seed);
    CHECK(back.steady_hold_s == sc.steady_hold_s);
    CHECK(back.init == sc.init);
    CHECK(back.ambient_C.points() == sc.ambient_C.points());
    CHECK(back.supply_temp_C.points() == sc.supply_temp_C.points());
    CHECK(back.emulate_ambient_full_C.points() == sc.emulate_ambient_full_C.points());
    CHECK(back.emulate_setpoint_full_C == sc.emulate_setpoint_full_C);
    CHECK(back.emulate_k_T == sc.emulate_k_T);
    REQUIRE(back.valve_schedules.count("v1") == 1);
    CHECK(back.valve_schedules.at("v1").points() == sc.valve_schedules.at("v1").points());
    REQUIRE(back.windows.size() == sc.windows.size());
    for (const auto& [id, ws] : sc.windows) {
        REQUIRE(back.windows.count(id) == 1);
        const auto& bw = back.windows.at(id);
        REQUIRE(bw.size() == ws.size());
        for (std::size_t i = 0; i < ws.size(); ++i) {
            CHECK(bw[i].start_s == ws[i].start_s);
            CHECK(bw[i].end_s == ws[i].end_s);
            CHECK(bw[i].heating_setpoint_C == ws[i].heating_setpoint_C);
            CHECK(bw[i].cooling_setpoint_C == ws[i].cooling_setpoint_C);
        }
    }
    REQUIRE(back.controllers.size() == sc.controllers.size());
    for (const auto& [id, cfg] : sc.controllers) {
        REQUIRE(back.controllers.count(id) == 1);
        const auto& bc = back.controllers.at(id);
        CHECK(bc.kp == cfg.kp);
        CHECK(bc.ki == cfg.ki);
        CHECK(bc.kd == cfg.kd);
        CHECK(bc.sample_time_s == cfg.sample_time_s);
        CHECK(bc.u_min == cfg.u_min);
        CHECK(bc.u_max == cfg.u_max);
    }
}

TEST_CASE("controller overrides inherit unset values from the default section") {
    const std::string text =
        "[scenario]\n"
        "duration_s = 100\n"
        "[controller]\n"
        "kp = 0.05\n"
        "ki = 0.001\n"
        "sample_time_s = 10\n"
        "[controller tm2]\n"
        "u_max = 0.33\n";
    const ExperimentScenario sc = scenario_from_config(parse_config(text));
    REQUIRE(sc.controllers.count("tm2") == 1);
    const PidConfig& c = sc.controllers.at("tm2");
    CHECK(c.kp == 0.05);
    CHECK(c.ki == 0.001);
    CHECK(c.sample_time_s == 10.0);
    CHECK(c.u_max == 0.33);
    CHECK(sc.controllers.at("").u_max == 1.0);
}

TEST_CASE("inheritance works even when the default section comes last") {
    const std::string text =
        "[scenario]\n"
        "duration_s = 100\n"
        "[controller tm2]\n"
        "u_max = 0.33\n"
        "[controller]\n"
        "kp = 0.07\n";
    const ExperimentScenario sc = scenario_from_config(parse_config(text));
    CHECK(sc.controllers.at("tm2").kp == 0.07);
    CHECK(sc.controllers.at("tm2").u_max == 0.33);
}

TEST_CASE("parser rejects malformed input with file and line") {
    using Catch::Matchers::ContainsSubstring;

    SECTION("unknown key") {
        const std::string text = "[fluid]\nrho = 1\ncp = 1\nrh0 = 2\n";
        CHECK_THROWS_WITH(model_from_config(parse_config(text, "bad.cfg")),
                          ContainsSubstring("bad.cfg:4") && ContainsSubstring("rh0"));
    }
    SECTION("unknown section in a model file") {
        const std::string text = "[fluid]\nrho = 1\ncp = 1\n[weather]\nwind = 3\n";
        CHECK_THROWS_WITH(model_from_config(parse_config(text, "bad.cfg")),
                          ContainsSubstring("bad.cfg:4") && ContainsSubstring("weather"));
    }
    SECTION("missing required key") {
        const std::string text = "[fluid]\nrho = 1\n";
        CHECK_THROWS_WITH(model_from_config(parse_config(text, "bad.cfg")),
                          ContainsSubstring("missing key 'cp'"));
    }
    SECTION("value is not a number") {
        const std::string text = "[fluid]\nrho = fast\ncp = 1\n";
        CHECK_THROWS_WITH(model_from_config(parse_config(text, "bad.cfg")),
                          ContainsSubstring("not a number"));
    }
    SECTION("duplicate key") {
        CHECK_THROWS_WITH(parse_config("[fluid]\nrho = 1\nrho = 2\n", "bad.cfg"),
                          ContainsSubstring("bad.cfg:3") && ContainsSubstring("duplicate key"));
    }
    SECTION("duplicate section") {
        CHECK_THROWS_WITH(parse_config("[fluid]\nrho=1\n[fluid]\ncp=2\n", "bad.cfg"),
                          ContainsSubstring("duplicate section"));
    }
    SECTION("entry before any section") {
        CHECK_THROWS_WITH(parse_config("rho = 1\n", "bad.cfg"),
                          ContainsSubstring("before the first section"));
    }
    SECTION("unterminated section header") {
        CHECK_THROWS_WITH(parse_config("[fluid\nrho = 1\n", "bad.cfg"),
                          ContainsSubstring("unterminated"));
    }
    SECTION("window needs four numbers") {
        const std::string text = "[scenario]\nduration_s=10\n[windows tm1]\nwindow = 1 2 3\n";
        CHECK_THROWS_WITH(scenario_from_config(parse_config(text, "bad.cfg")),
                          ContainsSubstring("four numbers"));
    }
    SECTION("profile with decreasing times") {
        const std::string text = "[scenario]\nduration_s=10\nambient_C = 10:5, 5:6\n";
        CHECK_THROWS_WITH(scenario_from_config(parse_config(text, "bad.cfg")),
                          ContainsSubstring("strictly increasing"));
    }
    SECTION("integer key rejects fractions") {
        const std::string text = "[scenario]\nduration_s=10\nsubsegments = 2.5\n";
        CHECK_THROWS_WITH(scenario_from_config(parse_config(text, "bad.cfg")),
                          ContainsSubstring("not an integer"));
    }
}

TEST_CASE("comments, blank lines and spacing are tolerated") {
    const std::string text =
        "# header comment\n"
        "\n"
        "[fluid]   ; trailing words\n"
        "  rho   =   994   # density\n"
        "cp=4183\n"
        "[plant]\n"
        "supply_temp_C = 51.5\n"
        "mdot_kgps = 0.0862\n"
        "outlet_node = po\n"
        "inlet_node = pi\n";
    const NetworkModel m = model_from_config(parse_config(text));
    CHECK(m.fluid.rho == 994.0);
    CHECK(m.fluid.cp == 4183.0);
    CHECK(m.plant.pump_pressure_rise_Pa == 0.0);  // optional key defaulted
}

TEST_CASE("a combined file serves as model and scenario") {
    const NetworkModel m = dhn::testing::two_loop_model();
    const ExperimentScenario sc = dhn::testing::bench_scenario();
    const std::string text = write_model_config(m) + "\n" + write_scenario_config(sc);
    const ConfigDocument doc = parse_config(text, "combined.cfg");
    const NetworkModel m2 = model_from_config(doc, /*allow_other=*/true);
    const ExperimentScenario sc2 = scenario_from_config(doc, /*allow_other=*/true);
    check_models_equal(m, m2);
    CHECK(sc2.duration_s == sc.duration_s);
    // Strict mode refuses the mixed file.
    CHECK_THROWS_AS(model_from_config(doc), validation_error);
    CHECK_THROWS_AS(scenario_from_config(doc), validation_error);
}

TEST_CASE("overrides rewrite or extend document entries") {
    const NetworkModel m = dhn::testing::two_loop_model();
    ConfigDocument doc = parse_config(write_model_config(m), "m.cfg");

    apply_override(doc, "fluid.rho = 998");
    apply_override(doc, "segment sup_a.length_m = 7.5");
    apply_override(doc, "plant.buffer_volume_m3=0");  // no spaces
    const NetworkModel m2 = model_from_config(doc);
    CHECK(m2.fluid.rho == 998.0);
    CHECK(m2.segments[0].length_m == 7.5);
    CHECK(m2.plant.buffer_volume_m3 == 0.0);

    // Adding a key that was absent also works (scenario dt override).
    ConfigDocument sdoc =
        parse_config("[scenario]\nduration_s = 10\n", "s.cfg");
    apply_override(sdoc, "scenario.dt_s = 0.25");
    CHECK(scenario_from_config(sdoc).dt_s == 0.25);

    CHECK_THROWS_AS(apply_override(doc, "nonsense"), validation_error);
    CHECK_THROWS_AS(apply_override(doc, "ghost.key = 1"), validation_error);
}

TEST_CASE("empty profile entries and stray values are rejected") {
    CHECK_THROWS_AS(scenario_from_config(
                        parse_config("[scenario]\nduration_s=1\nambient_C = 0:1, , 2:3\n")),
                    validation_error);
    CHECK_THROWS_AS(
        scenario_from_config(parse_config("[scenario]\nduration_s=1\nambient_C = 1, 2:3\n")),
        validation_error);
}
