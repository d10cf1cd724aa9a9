#ifndef DHN_CONFIG_HPP
#define DHN_CONFIG_HPP

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dhn/model.hpp"

namespace dhn {

/**
 * @brief One key = value entry of a config section.
 */
struct ConfigEntry {
    std::string key;
    std::string value;
    int line = 0;
    mutable bool used = false;  ///< set once a mapper consumed the entry
};

/**
 * @brief One [type id] section with its entries in file order.
 */
struct ConfigSection {
    std::string type;  ///< section kind, e.g. "segment"
    std::string id;    ///< optional instance name, e.g. "s1"
    int line = 0;
    std::vector<ConfigEntry> entries;

    std::string label() const { return id.empty() ? type : type + " " + id; }
};

/**
 * @brief Parsed config file: ordered sections of key = value entries.
 *
 * Grammar: `[type]` or `[type name]` opens a section; `key = value` lines
 * belong to the open section; `#` and `;` start comments.  Keys must be
 * unique within a section except the repeatable `window` key.
 */
struct ConfigDocument {
    std::string path;  ///< origin, used in error messages
    std::vector<ConfigSection> sections;

    const ConfigSection* find(const std::string& type, const std::string& id = "") const {
        for (const auto& s : sections)
            if (s.type == type && s.id == id) return &s;
        return nullptr;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] inline void cfg_fail(const std::string& path, int line, const std::string& msg) {
    throw validation_error(path + ":" + std::to_string(line) + ": " + msg);
}

inline double parse_double(const std::string& path, int line, const std::string& raw) {
    const std::string v = trim(raw);
    if (v.empty()) cfg_fail(path, line, "empty numeric value");
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size()) cfg_fail(path, line, "'" + v + "' is not a number");
    return x;
}

/** @brief Shortest round-trip decimal representation of a double. */
inline std::string fmt_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

}  // namespace detail

/**
 * @brief Parse config text.  @p path is only used for error messages.
 */
inline ConfigDocument parse_config(const std::string& text, const std::string& path = "<string>") {
    ConfigDocument doc;
    doc.path = path;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        auto cut = raw.find_first_of("#;");
        if (cut != std::string::npos) raw.erase(cut);
        const std::string s = detail::trim(raw);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') detail::cfg_fail(path, line, "unterminated section header");
            std::istringstream hdr(s.substr(1, s.size() - 2));
            ConfigSection sec;
            sec.line = line;
            std::string extra;
            if (!(hdr >> sec.type)) detail::cfg_fail(path, line, "empty section header");
            hdr >> sec.id;
            if (hdr >> extra) detail::cfg_fail(path, line, "too many words in section header");
            for (const auto& prev : doc.sections)
                if (prev.type == sec.type && prev.id == sec.id)
                    detail::cfg_fail(path, line, "duplicate section [" + sec.label() + "]");
            doc.sections.push_back(std::move(sec));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            detail::cfg_fail(path, line, "expected 'key = value' or a section header");
        if (doc.sections.empty())
            detail::cfg_fail(path, line, "entry before the first section header");
        ConfigEntry e;
        e.key = detail::trim(s.substr(0, eq));
        e.value = detail::trim(s.substr(eq + 1));
        e.line = line;
        if (e.key.empty()) detail::cfg_fail(path, line, "empty key");
        if (e.value.empty()) detail::cfg_fail(path, line, "empty value for key '" + e.key + "'");
        auto& sec = doc.sections.back();
        if (e.key != "window")
            for (const auto& prev : sec.entries)
                if (prev.key == e.key)
                    detail::cfg_fail(path, line,
                                     "duplicate key '" + e.key + "' in [" + sec.label() + "]");
        sec.entries.push_back(std::move(e));
    }
    return doc;
}

/** @brief Read and parse a config file. */
inline ConfigDocument load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

/**
 * @brief Typed, consumption-tracking view of one section.
 *
 * Every getter marks the entry as used; finish() rejects entries no mapper
 * asked for, so typos in keys fail loudly instead of being ignored.
 */
class SectionReader {
public:
    SectionReader(const ConfigDocument& doc, const ConfigSection& sec) : doc_(doc), sec_(sec) {}

    const std::string& path() const { return doc_.path; }
    const ConfigSection& section() const { return sec_; }

    std::optional<std::string> get(const std::string& key) const {
        for (const auto& e : sec_.entries)
            if (e.key == key) {
                e.used = true;
                return e.value;
            }
        return std::nullopt;
    }

    std::string require(const std::string& key) const {
        auto v = get(key);
        if (!v)
            detail::cfg_fail(doc_.path, sec_.line,
                             "[" + sec_.label() + "] is missing key '" + key + "'");
        return *v;
    }

    double require_double(const std::string& key) const {
        return detail::parse_double(doc_.path, line_of(key), require(key));
    }

    double get_double(const std::string& key, double fallback) const {
        auto v = get(key);
        return v ? detail::parse_double(doc_.path, line_of(key), *v) : fallback;
    }

    int get_int(const std::string& key, int fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        const double x = detail::parse_double(doc_.path, line_of(key), *v);
        const int i = static_cast<int>(x);
        if (static_cast<double>(i) != x)
            detail::cfg_fail(doc_.path, line_of(key), "'" + *v + "' is not an integer");
        return i;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto v = get(key);
        return v ? *v : fallback;
    }

    /**
     * @brief Piecewise-linear profile: either a plain number or a
     *        comma-separated list of time:value pairs.
     */
    PiecewiseLinear get_profile(const std::string& key, const PiecewiseLinear& fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        return parse_profile(*v, line_of(key));
    }

    PiecewiseLinear require_profile(const std::string& key) const {
        return parse_profile(require(key), line_of(key));
    }

    /** @brief All entries named 'window', parsed as "start end heat cool". */
    std::vector<OccupancyWindow> windows() const {
        std::vector<OccupancyWindow> out;
        for (const auto& e : sec_.entries) {
            if (e.key != "window") continue;
            e.used = true;
            std::istringstream is(e.value);
            OccupancyWindow w;
            if (!(is >> w.start_s >> w.end_s >> w.heating_setpoint_C >> w.cooling_setpoint_C))
                detail::cfg_fail(doc_.path, e.line,
                                 "window needs four numbers: start end heating cooling");
            std::string extra;
            if (is >> extra) detail::cfg_fail(doc_.path, e.line, "too many values in window");
            out.push_back(w);
        }
        return out;
    }

    /** @brief Error out on entries no getter consumed. */
    void finish() const {
        for (const auto& e : sec_.entries)
            if (!e.used)
                detail::cfg_fail(doc_.path, e.line,
                                 "unknown key '" + e.key + "' in [" + sec_.label() + "]");
    }

private:
    int line_of(const std::string& key) const {
        for (const auto& e : sec_.entries)
            if (e.key == key) return e.line;
        return sec_.line;
    }

    PiecewiseLinear parse_profile(const std::string& value, int line) const {
        std::vector<std::pair<double, double>> pts;
        std::istringstream is(value);
        std::string part;
        bool bare = false;
        while (std::getline(is, part, ',')) {
            part = detail::trim(part);
            if (part.empty()) detail::cfg_fail(doc_.path, line, "empty profile entry");
            const auto colon = part.find(':');
            if (colon == std::string::npos) {
                if (!pts.empty())
                    detail::cfg_fail(doc_.path, line,
                                     "a plain value cannot be mixed with time:value entries");
                bare = true;
                pts.emplace_back(0.0, detail::parse_double(doc_.path, line, part));
            } else if (bare) {
                detail::cfg_fail(doc_.path, line,
                                 "a plain value cannot be mixed with time:value entries");
            } else {
                pts.emplace_back(detail::parse_double(doc_.path, line, part.substr(0, colon)),
                                 detail::parse_double(doc_.path, line, part.substr(colon + 1)));
            }
        }
        if (pts.empty()) detail::cfg_fail(doc_.path, line, "empty profile");
        try {
            return PiecewiseLinear(std::move(pts));
        } catch (const std::invalid_argument& e) {
            detail::cfg_fail(doc_.path, line, e.what());
        }
    }

    const ConfigDocument& doc_;
    const ConfigSection& sec_;
};

namespace detail {

inline bool is_model_section(const std::string& type) {
    return type == "network" || type == "fluid" || type == "plant" || type == "segment" ||
           type == "valve" || type == "heat_exchanger" || type == "thermal_mass";
}

inline bool is_scenario_section(const std::string& type) {
    return type == "scenario" || type == "windows" || type == "controller";
}

}  // namespace detail

/**
 * @brief Build a NetworkModel from the model sections of a document.
 *
 * @param allow_other  Accept (and skip) non-model sections, so a model and a
 *                     scenario can share one file.
 */
inline NetworkModel model_from_config(const ConfigDocument& doc, bool allow_other = false) {
    NetworkModel m;
    bool have_fluid = false, have_plant = false;
    for (const auto& sec : doc.sections) {
        if (!detail::is_model_section(sec.type)) {
            if (allow_other) continue;
            detail::cfg_fail(doc.path, sec.line,
                             "unexpected section [" + sec.label() + "] in a model file");
        }
        SectionReader r(doc, sec);
        if (sec.type == "network") {
            m.name = r.get_string("name", "");
        } else if (sec.type == "fluid") {
            have_fluid = true;
            m.fluid.rho = r.require_double("rho");
            m.fluid.cp = r.require_double("cp");
        } else if (sec.type == "plant") {
            have_plant = true;
            m.plant.supply_temp_C = r.require_double("supply_temp_C");
            m.plant.mdot_kgps = r.require_double("mdot_kgps");
            m.plant.pump_pressure_rise_Pa = r.get_double("pump_pressure_rise_Pa", 0.0);
            m.plant.outlet_node = r.require("outlet_node");
            m.plant.inlet_node = r.require("inlet_node");
            m.plant.buffer_volume_m3 = r.get_double("buffer_volume_m3", 0.0);
            m.plant.buffer_hAs_WpK = r.get_double("buffer_hAs_WpK", 0.0);
        } else if (sec.type == "segment") {
            PipeSegment s;
            s.id = sec.id;
            s.from = r.require("from");
            s.to = r.require("to");
            s.length_m = r.require_double("length_m");
            s.diameter_m = r.require_double("diameter_m");
            s.k_tot = r.require_double("k_tot");
            s.hAs_WpK = r.require_double("hAs_WpK");
            m.segments.push_back(std::move(s));
        } else if (sec.type == "valve") {
            ValveModel v;
            v.id = sec.id;
            v.node = r.require("node");
            v.user_branch_to = r.require("user_branch_to");
            v.bypass_branch_to = r.require("bypass_branch_to");
            v.user_k_min = r.require_double("user_k_min");
            v.user_k_max = r.require_double("user_k_max");
            v.bypass_k_min = r.require_double("bypass_k_min");
            v.bypass_k_max = r.require_double("bypass_k_max");
            const std::string ch = r.get_string("characteristic", "equal_percentage");
            if (ch == "linear") v.characteristic = ValveCharacteristic::linear;
            else if (ch == "equal_percentage")
                v.characteristic = ValveCharacteristic::equal_percentage;
            else
                detail::cfg_fail(doc.path, sec.line, "unknown valve characteristic '" + ch + "'");
            m.valves.push_back(std::move(v));
        } else if (sec.type == "heat_exchanger") {
            HeatExchanger h;
            h.id = sec.id;
            h.from = r.require("from");
            h.to = r.require("to");
            h.volume_m3 = r.require_double("volume_m3");
            h.k_tot = r.get_double("k_tot", 0.0);
            h.hAs_WpK = r.require_double("hAs_WpK");
            h.thermal_mass = r.require("thermal_mass");
            m.heat_exchangers.push_back(std::move(h));
        } else if (sec.type == "thermal_mass") {
            ThermalMass tm;
            tm.id = sec.id;
            tm.C_JpK = r.require_double("C_JpK");
            tm.hAs_act_WpK = r.require_double("hAs_act_WpK");
            tm.hAs_sim_WpK = r.get_double("hAs_sim_WpK", tm.hAs_act_WpK);
            tm.setpoint_C = r.require_double("setpoint_C");
            if (auto p = r.get("peltier_max_W")) {
                PeltierUnit pu;
                pu.max_power_W = detail::parse_double(doc.path, sec.line, *p);
                pu.tracking_tau_s = r.get_double("peltier_tau_s", 0.0);
                tm.peltier = pu;
            }
            m.thermal_masses.push_back(std::move(tm));
        }
        r.finish();
    }
    if (!have_fluid) throw validation_error(doc.path + ": missing [fluid] section");
    if (!have_plant) throw validation_error(doc.path + ": missing [plant] section");
    return m;
}

/**
 * @brief Build an ExperimentScenario from the scenario sections of a document.
 */
inline ExperimentScenario scenario_from_config(const ConfigDocument& doc,
                                               bool allow_other = false) {
    ExperimentScenario sc;
    bool have_scenario = false;
    // Controller defaults must be known before overrides, regardless of file
    // order, so scan for the default section first.
    PidConfig base;
    if (const ConfigSection* def = doc.find("controller")) {
        SectionReader r(doc, *def);
        base.kp = r.get_double("kp", 0.0);
        base.ki = r.get_double("ki", 0.0);
        base.kd = r.get_double("kd", 0.0);
        base.sample_time_s = r.get_double("sample_time_s", 0.0);
        base.u_min = r.get_double("u_min", 0.0);
        base.u_max = r.get_double("u_max", 1.0);
        r.finish();
        sc.controllers[""] = base;
    }
    for (const auto& sec : doc.sections) {
        if (!detail::is_scenario_section(sec.type)) {
            if (allow_other) continue;
            detail::cfg_fail(doc.path, sec.line,
                             "unexpected section [" + sec.label() + "] in a scenario file");
        }
        SectionReader r(doc, sec);
        if (sec.type == "scenario") {
            have_scenario = true;
            sc.duration_s = r.require_double("duration_s");
            sc.output_interval_s = r.get_double("output_interval_s", 10.0);
            sc.dt_s = r.get_double("dt_s", 0.0);
            sc.subsegments = r.get_int("subsegments", 4);
            sc.seed = static_cast<unsigned>(r.get_int("seed", 0));
            sc.steady_hold_s = r.get_double("steady_hold_s", 600.0);
            const std::string init = r.get_string("init", "steady");
            if (init == "steady") sc.init = InitMode::steady;
            else if (init == "ambient") sc.init = InitMode::ambient;
            else detail::cfg_fail(doc.path, sec.line, "unknown init mode '" + init + "'");
            sc.ambient_C = r.get_profile("ambient_C", PiecewiseLinear(20.0));
            sc.supply_temp_C = r.get_profile("supply_temp_C", PiecewiseLinear());
            sc.emulate_ambient_full_C =
                r.get_profile("emulate_ambient_full_C", PiecewiseLinear());
            sc.emulate_setpoint_full_C = r.get_double("emulate_setpoint_full_C", 0.0);
            sc.emulate_k_T = r.get_double("emulate_k_T", 0.0);
            for (const auto& e : sec.entries) {
                if (e.key.rfind("valve_", 0) == 0) {
                    const std::string vid = e.key.substr(6);
                    if (vid.empty()) detail::cfg_fail(doc.path, e.line, "valve key without id");
                    sc.valve_schedules[vid] = r.require_profile(e.key);
                }
            }
        } else if (sec.type == "windows") {
            if (sec.id.empty())
                detail::cfg_fail(doc.path, sec.line, "[windows] needs a thermal mass id");
            if (auto c = r.get("cooling_setpoint_C"))
                sc.default_cooling_setpoint_C[sec.id] =
                    detail::parse_double(doc.path, sec.line, *c);
            sc.windows[sec.id] = r.windows();
        } else if (sec.type == "controller") {
            if (sec.id.empty()) {
                // Default section, consumed above; mark keys as used.
                SectionReader rd(doc, sec);
                for (const char* k : {"kp", "ki", "kd", "sample_time_s", "u_min", "u_max"})
                    rd.get(k);
                rd.finish();
                continue;
            }
            PidConfig cfg = base;
            cfg.kp = r.get_double("kp", cfg.kp);
            cfg.ki = r.get_double("ki", cfg.ki);
            cfg.kd = r.get_double("kd", cfg.kd);
            cfg.sample_time_s = r.get_double("sample_time_s", cfg.sample_time_s);
            cfg.u_min = r.get_double("u_min", cfg.u_min);
            cfg.u_max = r.get_double("u_max", cfg.u_max);
            sc.controllers[sec.id] = cfg;
        }
        r.finish();
    }
    if (!have_scenario) throw validation_error(doc.path + ": missing [scenario] section");
    return sc;
}

namespace detail {

inline std::string profile_to_string(const PiecewiseLinear& p) {
    std::ostringstream os;
    if (p.points().size() == 1) return fmt_double(p.points().front().second);
    bool first = true;
    for (const auto& [t, v] : p.points()) {
        if (!first) os << ", ";
        first = false;
        os << fmt_double(t) << ":" << fmt_double(v);
    }
    return os.str();
}

}  // namespace detail

/**
 * @brief Serialize a model to config text that parses back to equal values.
 */
inline std::string write_model_config(const NetworkModel& m) {
    using detail::fmt_double;
    std::ostringstream os;
    if (!m.name.empty()) os << "[network]\nname = " << m.name << "\n\n";
    os << "[fluid]\n";
    os << "rho = " << fmt_double(m.fluid.rho) << "\n";
    os << "cp = " << fmt_double(m.fluid.cp) << "\n\n";
    os << "[plant]\n";
    os << "supply_temp_C = " << fmt_double(m.plant.supply_temp_C) << "\n";
    os << "mdot_kgps = " << fmt_double(m.plant.mdot_kgps) << "\n";
    os << "pump_pressure_rise_Pa = " << fmt_double(m.plant.pump_pressure_rise_Pa) << "\n";
    os << "outlet_node = " << m.plant.outlet_node << "\n";
    os << "inlet_node = " << m.plant.inlet_node << "\n";
    os << "buffer_volume_m3 = " << fmt_double(m.plant.buffer_volume_m3) << "\n";
    os << "buffer_hAs_WpK = " << fmt_double(m.plant.buffer_hAs_WpK) << "\n";
    for (const auto& s : m.segments) {
        os << "\n[segment " << s.id << "]\n";
        os << "from = " << s.from << "\n";
        os << "to = " << s.to << "\n";
        os << "length_m = " << fmt_double(s.length_m) << "\n";
        os << "diameter_m = " << fmt_double(s.diameter_m) << "\n";
        os << "k_tot = " << fmt_double(s.k_tot) << "\n";
        os << "hAs_WpK = " << fmt_double(s.hAs_WpK) << "\n";
    }
    for (const auto& v : m.valves) {
        os << "\n[valve " << v.id << "]\n";
        os << "node = " << v.node << "\n";
        os << "user_branch_to = " << v.user_branch_to << "\n";
        os << "bypass_branch_to = " << v.bypass_branch_to << "\n";
        os << "user_k_min = " << fmt_double(v.user_k_min) << "\n";
        os << "user_k_max = " << fmt_double(v.user_k_max) << "\n";
        os << "bypass_k_min = " << fmt_double(v.bypass_k_min) << "\n";
        os << "bypass_k_max = " << fmt_double(v.bypass_k_max) << "\n";
        os << "characteristic = "
           << (v.characteristic == ValveCharacteristic::linear ? "linear" : "equal_percentage")
           << "\n";
    }
    for (const auto& h : m.heat_exchangers) {
        os << "\n[heat_exchanger " << h.id << "]\n";
        os << "from = " << h.from << "\n";
        os << "to = " << h.to << "\n";
        os << "volume_m3 = " << fmt_double(h.volume_m3) << "\n";
        os << "k_tot = " << fmt_double(h.k_tot) << "\n";
        os << "hAs_WpK = " << fmt_double(h.hAs_WpK) << "\n";
        os << "thermal_mass = " << h.thermal_mass << "\n";
    }
    for (const auto& tm : m.thermal_masses) {
        os << "\n[thermal_mass " << tm.id << "]\n";
        os << "C_JpK = " << fmt_double(tm.C_JpK) << "\n";
        os << "hAs_act_WpK = " << fmt_double(tm.hAs_act_WpK) << "\n";
        os << "hAs_sim_WpK = " << fmt_double(tm.hAs_sim_WpK) << "\n";
        os << "setpoint_C = " << fmt_double(tm.setpoint_C) << "\n";
        if (tm.peltier) {
            os << "peltier_max_W = " << fmt_double(tm.peltier->max_power_W) << "\n";
            os << "peltier_tau_s = " << fmt_double(tm.peltier->tracking_tau_s) << "\n";
        }
    }
    return os.str();
}

/**
 * @brief Serialize a scenario to config text that parses back to equal values.
 */
inline std::string write_scenario_config(const ExperimentScenario& sc) {
    using detail::fmt_double;
    using detail::profile_to_string;
    std::ostringstream os;
    os << "[scenario]\n";
    os << "duration_s = " << fmt_double(sc.duration_s) << "\n";
    os << "output_interval_s = " << fmt_double(sc.output_interval_s) << "\n";
    os << "dt_s = " << fmt_double(sc.dt_s) << "\n";
    os << "subsegments = " << sc.subsegments << "\n";
    os << "seed = " << sc.seed << "\n";
    os << "steady_hold_s = " << fmt_double(sc.steady_hold_s) << "\n";
    os << "init = " << (sc.init == InitMode::steady ? "steady" : "ambient") << "\n";
    os << "ambient_C = " << profile_to_string(sc.ambient_C) << "\n";
    if (!sc.supply_temp_C.empty())
        os << "supply_temp_C = " << profile_to_string(sc.supply_temp_C) << "\n";
    if (!sc.emulate_ambient_full_C.empty()) {
        os << "emulate_ambient_full_C = " << profile_to_string(sc.emulate_ambient_full_C) << "\n";
        os << "emulate_setpoint_full_C = " << fmt_double(sc.emulate_setpoint_full_C) << "\n";
        os << "emulate_k_T = " << fmt_double(sc.emulate_k_T) << "\n";
    }
    for (const auto& [vid, sched] : sc.valve_schedules)
        os << "valve_" << vid << " = " << profile_to_string(sched) << "\n";
    for (const auto& [tmid, ws] : sc.windows) {
        os << "\n[windows " << tmid << "]\n";
        auto dit = sc.default_cooling_setpoint_C.find(tmid);
        if (dit != sc.default_cooling_setpoint_C.end())
            os << "cooling_setpoint_C = " << fmt_double(dit->second) << "\n";
        for (const auto& w : ws)
            os << "window = " << fmt_double(w.start_s) << " " << fmt_double(w.end_s) << " "
               << fmt_double(w.heating_setpoint_C) << " " << fmt_double(w.cooling_setpoint_C)
               << "\n";
    }
    for (const auto& [tmid, cfg] : sc.controllers) {
        os << "\n[controller" << (tmid.empty() ? "" : " " + tmid) << "]\n";
        os << "kp = " << fmt_double(cfg.kp) << "\n";
        os << "ki = " << fmt_double(cfg.ki) << "\n";
        os << "kd = " << fmt_double(cfg.kd) << "\n";
        os << "sample_time_s = " << fmt_double(cfg.sample_time_s) << "\n";
        os << "u_min = " << fmt_double(cfg.u_min) << "\n";
        os << "u_max = " << fmt_double(cfg.u_max) << "\n";
    }
    return os.str();
}

/**
 * @brief Apply a textual override "section.key=value" or
 *        "type id.key=value" to a document before mapping it.
 *
 * Returns false when the document has no matching section, so callers that
 * split one experiment across several files can offer the override to each
 * document in turn.  Malformed specs always throw.
 */
inline bool try_apply_override(ConfigDocument& doc, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
        throw validation_error("override '" + spec + "' must look like section.key=value");
    const std::string lhs = detail::trim(spec.substr(0, eq));
    const std::string value = detail::trim(spec.substr(eq + 1));
    const auto dot = lhs.rfind('.');
    if (dot == std::string::npos || value.empty())
        throw validation_error("override '" + spec + "' must look like section.key=value");
    std::string sect = detail::trim(lhs.substr(0, dot));
    const std::string key = detail::trim(lhs.substr(dot + 1));
    std::string type = sect, id;
    const auto sp = sect.find(' ');
    if (sp != std::string::npos) {
        type = detail::trim(sect.substr(0, sp));
        id = detail::trim(sect.substr(sp + 1));
    }
    for (auto& s : doc.sections) {
        if (s.type != type || s.id != id) continue;
        for (auto& e : s.entries)
            if (e.key == key) {
                e.value = value;
                return true;
            }
        ConfigEntry e;
        e.key = key;
        e.value = value;
        e.line = s.line;
        s.entries.push_back(std::move(e));
        return true;
    }
    return false;
}

/// Single-document override: a missing section is an error.
inline void apply_override(ConfigDocument& doc, const std::string& spec) {
    if (!try_apply_override(doc, spec)) {
        std::string sect = detail::trim(spec.substr(0, spec.rfind('.', spec.find('='))));
        throw validation_error("override '" + spec + "': no section [" + sect + "]");
    }
}

}  // namespace dhn

#endif  // DHN_CONFIG_HPP
