#pragma once

// JSON scenario documents.
//
// Every object rejects unknown keys; omitted optional keys take the documented
// defaults. Only `duration` and `sources` are required.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mippv/errors.hpp"
#include "mippv/scenario.hpp"

namespace mippv {

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object())
        throw ConfigError(where + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            known = known || it.key() == k;
        if (!known)
            throw ConfigError((where.empty() ? "" : where + ".") + it.key() + ": unknown key");
    }
}

inline std::string join_key(const std::string& where, const std::string& key) {
    return where.empty() ? key : where + "." + key;
}

inline double get_number(const json& obj, const std::string& where, const std::string& key, double fallback) {
    if (!obj.contains(key))
        return fallback;
    const json& v = obj.at(key);
    if (!v.is_number())
        throw ConfigError(join_key(where, key) + ": expected a number");
    return v.get<double>();
}

inline double require_number(const json& obj, const std::string& where, const std::string& key) {
    if (!obj.contains(key))
        throw ConfigError("missing `" + join_key(where, key) + "`");
    return get_number(obj, where, key, 0.0);
}

inline int get_count(const json& obj, const std::string& where, const std::string& key, int fallback) {
    if (!obj.contains(key))
        return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer())
        throw ConfigError(join_key(where, key) + ": expected an integer");
    return v.get<int>();
}

inline std::string get_string(const json& obj, const std::string& where, const std::string& key,
                              const std::string& fallback) {
    if (!obj.contains(key))
        return fallback;
    const json& v = obj.at(key);
    if (!v.is_string())
        throw ConfigError(join_key(where, key) + ": expected a string");
    return v.get<std::string>();
}

inline std::vector<double> get_numbers(const json& v, const std::string& key) {
    if (!v.is_array())
        throw ConfigError(key + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number())
            throw ConfigError(key + ": expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

inline ConnectionStructure get_structure(const json& v, const std::string& key) {
    if (!v.is_string())
        throw ConfigError(key + ": expected a structure name");
    const auto s = parse_structure(v.get<std::string>(), kChannels);
    if (!s)
        throw ConfigError(key + ": unknown structure `" + v.get<std::string>() + "` (parallel|cascade|pv1|pv2)");
    return *s;
}

inline SlotMode get_slots(const json& v, const std::string& key) {
    if (v == "alternating")
        return SlotMode::Alternating;
    if (v == "shared")
        return SlotMode::Shared;
    throw ConfigError(key + ": expected `alternating` or `shared`");
}

inline PiConfig get_pi(const json& obj, const std::string& where, PiConfig pi) {
    reject_unknown(obj, where, {"kp", "ki", "min", "max"});
    pi.kp = get_number(obj, where, "kp", pi.kp);
    pi.ki = get_number(obj, where, "ki", pi.ki);
    pi.out_min = get_number(obj, where, "min", pi.out_min);
    pi.out_max = get_number(obj, where, "max", pi.out_max);
    return pi;
}

inline PanelDatasheet parse_panel(const json& obj, const std::string& where) {
    reject_unknown(obj, where,
                   {"isc", "voc", "vmp", "imp", "alpha_isc", "beta_voc", "cells_in_series", "panels_in_series"});
    PanelDatasheet d;
    d.isc = get_number(obj, where, "isc", d.isc);
    d.voc = get_number(obj, where, "voc", d.voc);
    d.vmp = get_number(obj, where, "vmp", d.vmp);
    d.imp = get_number(obj, where, "imp", d.imp);
    d.alpha_isc = get_number(obj, where, "alpha_isc", d.alpha_isc);
    d.beta_voc = get_number(obj, where, "beta_voc", d.beta_voc);
    d.cells_in_series = get_count(obj, where, "cells_in_series", d.cells_in_series);
    d.panels_in_series = get_count(obj, where, "panels_in_series", d.panels_in_series);
    return d;
}

inline json panel_json(const PanelDatasheet& d) {
    return {{"isc", d.isc},
            {"voc", d.voc},
            {"vmp", d.vmp},
            {"imp", d.imp},
            {"alpha_isc", d.alpha_isc},
            {"beta_voc", d.beta_voc},
            {"cells_in_series", d.cells_in_series},
            {"panels_in_series", d.panels_in_series}};
}

inline json pi_json(const PiConfig& pi) {
    return {{"kp", pi.kp}, {"ki", pi.ki}, {"min", pi.out_min}, {"max", pi.out_max}};
}

}  // namespace detail

/// Panel datasheet block on its own (the `mpp` subcommand accepts this or a scenario).
inline PanelDatasheet parse_panel_config(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("panel config is not valid JSON: ") + e.what());
    }
    if (doc.is_object() && doc.contains("panel") && doc.contains("duration"))
        return detail::parse_panel(doc.at("panel"), "panel");
    if (doc.is_object() && doc.contains("panel") && doc.size() == 1)
        return detail::parse_panel(doc.at("panel"), "panel");
    return detail::parse_panel(doc, "");
}

/// Parse and validate a scenario document. Relative mission-profile paths are kept as
/// written; the engine resolves them against RunOptions::base_dir.
inline Scenario parse_scenario(const std::string& text) {
    using detail::json;
    json doc;
    try {
        doc = json::parse(text.empty() ? std::string("{}") : text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
    }
    detail::reject_unknown(doc, "",
                           {"name", "duration", "model", "dt_sim", "dt_control", "record_interval", "window_fraction",
                            "sources", "panel", "circuit", "control", "atmosphere", "events", "mission_profile",
                            "reference"});
    Scenario sc;
    sc.duration = detail::require_number(doc, "", "duration");
    if (!(sc.duration > 0.0))
        throw ConfigError("duration: must be > 0");
    sc.name = detail::get_string(doc, "", "name", "");

    const std::string model = detail::get_string(doc, "", "model", "averaged");
    if (model == "averaged")
        sc.model = ModelKind::Averaged;
    else if (model == "switched")
        sc.model = ModelKind::Switched;
    else
        throw ConfigError("model: expected `averaged` or `switched`");
    if (doc.contains("dt_sim"))
        sc.dt_sim = detail::get_number(doc, "", "dt_sim", 0.0);
    if (doc.contains("dt_control"))
        sc.dt_control = detail::get_number(doc, "", "dt_control", 0.0);
    sc.record_interval = detail::get_number(doc, "", "record_interval", sc.record_interval);
    sc.window_fraction = detail::get_number(doc, "", "window_fraction", sc.window_fraction);

    if (!doc.contains("sources"))
        throw ConfigError("missing `sources`");
    const json& src = doc.at("sources");
    detail::reject_unknown(src, "sources", {"type", "voltages"});
    const std::string type = detail::get_string(src, "sources", "type", "pv");
    if (type == "ideal") {
        sc.sources = SourceKind::Ideal;
        if (!src.contains("voltages"))
            throw ConfigError("missing `sources.voltages`");
        sc.source_voltages = detail::get_numbers(src.at("voltages"), "sources.voltages");
    } else if (type == "pv") {
        sc.sources = SourceKind::PvString;
        if (src.contains("voltages"))
            throw ConfigError("sources.voltages: only valid with type `ideal`");
    } else {
        throw ConfigError("sources.type: expected `ideal` or `pv`");
    }

    if (doc.contains("panel"))
        sc.panel = detail::parse_panel(doc.at("panel"), "panel");

    if (doc.contains("circuit")) {
        const json& c = doc.at("circuit");
        detail::reject_unknown(c, "circuit", {"l", "c_pv", "c_o", "r_load", "f_sw"});
        sc.circuit.l = detail::get_number(c, "circuit", "l", sc.circuit.l);
        sc.circuit.c_pv = detail::get_number(c, "circuit", "c_pv", sc.circuit.c_pv);
        sc.circuit.c_o = detail::get_number(c, "circuit", "c_o", sc.circuit.c_o);
        sc.circuit.r_load = detail::get_number(c, "circuit", "r_load", sc.circuit.r_load);
        sc.circuit.f_sw = detail::get_number(c, "circuit", "f_sw", sc.circuit.f_sw);
    }

    auto& ctl = sc.control;
    ctl.kind = sc.sources == SourceKind::Ideal ? ControlKind::Fixed : ControlKind::Mppt;
    if (doc.contains("control")) {
        const json& c = doc.at("control");
        detail::reject_unknown(c, "control",
                               {"mode", "d_m", "structure", "duties", "slots", "thresholds", "pno", "pi_voltage",
                                "pi_current"});
        const std::string mode = detail::get_string(c, "control", "mode", to_token(ctl.kind));
        if (mode == "fixed")
            ctl.kind = ControlKind::Fixed;
        else if (mode == "mppt")
            ctl.kind = ControlKind::Mppt;
        else
            throw ConfigError("control.mode: expected `fixed` or `mppt`");
        ctl.d_m = detail::get_number(c, "control", "d_m", ctl.d_m);
        if (c.contains("structure"))
            ctl.structure = detail::get_structure(c.at("structure"), "control.structure");
        if (c.contains("duties"))
            ctl.duties = detail::get_numbers(c.at("duties"), "control.duties");
        if (c.contains("slots"))
            ctl.slots = detail::get_slots(c.at("slots"), "control.slots");
        if (c.contains("thresholds")) {
            const json& t = c.at("thresholds");
            const std::string w = "control.thresholds";
            detail::reject_unknown(t, w, {"ir_th", "t_th", "ir_low", "t_low", "mismatch_rel"});
            ctl.thresholds.ir_th = detail::get_number(t, w, "ir_th", ctl.thresholds.ir_th);
            ctl.thresholds.t_th = detail::get_number(t, w, "t_th", ctl.thresholds.t_th);
            ctl.thresholds.ir_low = detail::get_number(t, w, "ir_low", ctl.thresholds.ir_low);
            ctl.thresholds.t_low = detail::get_number(t, w, "t_low", ctl.thresholds.t_low);
            ctl.thresholds.mismatch_rel = detail::get_number(t, w, "mismatch_rel", ctl.thresholds.mismatch_rel);
        }
        if (c.contains("pno")) {
            const json& p = c.at("pno");
            detail::reject_unknown(p, "control.pno", {"period", "step", "v_init_frac"});
            ctl.pno.period = detail::get_number(p, "control.pno", "period", ctl.pno.period);
            if (p.contains("step"))
                ctl.pno.step = detail::get_number(p, "control.pno", "step", 0.0);
            ctl.pno.v_init_frac = detail::get_number(p, "control.pno", "v_init_frac", ctl.pno.v_init_frac);
        }
        if (c.contains("pi_voltage"))
            ctl.pi_voltage = detail::get_pi(c.at("pi_voltage"), "control.pi_voltage", ctl.pi_voltage);
        if (c.contains("pi_current"))
            ctl.pi_current = detail::get_pi(c.at("pi_current"), "control.pi_current", ctl.pi_current);
    }

    if (doc.contains("atmosphere")) {
        const json& a = doc.at("atmosphere");
        if (!a.is_array() || a.size() != kChannels)
            throw ConfigError("atmosphere: expected an array of 2 channel entries");
        for (std::size_t k = 0; k < kChannels; ++k) {
            const std::string w = "atmosphere[" + std::to_string(k) + "]";
            detail::reject_unknown(a[k], w, {"irradiance", "temperature"});
            sc.atmosphere[k].irradiance = detail::get_number(a[k], w, "irradiance", sc.atmosphere[k].irradiance);
            sc.atmosphere[k].temperature = detail::get_number(a[k], w, "temperature", sc.atmosphere[k].temperature);
        }
    }

    if (doc.contains("events")) {
        const json& ev = doc.at("events");
        if (!ev.is_array())
            throw ConfigError("events: expected an array");
        for (std::size_t k = 0; k < ev.size(); ++k) {
            const std::string w = "events[" + std::to_string(k) + "]";
            detail::reject_unknown(ev[k], w,
                                   {"t", "structure", "duties", "slots", "channel", "irradiance", "temperature"});
            Event e;
            e.t = detail::require_number(ev[k], w, "t");
            if (ev[k].contains("structure"))
                e.structure = detail::get_structure(ev[k].at("structure"), w + ".structure");
            if (ev[k].contains("duties"))
                e.duties = detail::get_numbers(ev[k].at("duties"), w + ".duties");
            if (ev[k].contains("slots"))
                e.slots = detail::get_slots(ev[k].at("slots"), w + ".slots");
            if (ev[k].contains("channel")) {
                const int ch = detail::get_count(ev[k], w, "channel", 0);
                if (ch < 1 || ch > static_cast<int>(kChannels))
                    throw ConfigError(w + ".channel: must be 1 or 2");
                e.channel = static_cast<std::size_t>(ch - 1);
            }
            if (ev[k].contains("irradiance"))
                e.irradiance = detail::get_number(ev[k], w, "irradiance", 0.0);
            if (ev[k].contains("temperature"))
                e.temperature = detail::get_number(ev[k], w, "temperature", 0.0);
            sc.events.push_back(std::move(e));
        }
    }

    if (doc.contains("mission_profile")) {
        const json& m = doc.at("mission_profile");
        detail::reject_unknown(m, "mission_profile", {"path", "time_scale"});
        MissionProfileRef ref;
        if (!m.contains("path"))
            throw ConfigError("missing `mission_profile.path`");
        ref.path = detail::get_string(m, "mission_profile", "path", "");
        ref.time_scale = detail::get_number(m, "mission_profile", "time_scale", 1.0);
        sc.mission_profile = ref;
    }

    if (doc.contains("reference")) {
        const json& r = doc.at("reference");
        if (!r.is_array())
            throw ConfigError("reference: expected an array");
        for (std::size_t k = 0; k < r.size(); ++k) {
            const std::string w = "reference[" + std::to_string(k) + "]";
            detail::reject_unknown(r[k], w, {"phase", "quantity", "reported", "note"});
            ReferenceValue v;
            const int phase = detail::get_count(r[k], w, "phase", 1);
            if (phase < 1)
                throw ConfigError(w + ".phase: phases are numbered from 1");
            v.phase = static_cast<std::size_t>(phase);
            if (!r[k].contains("quantity"))
                throw ConfigError("missing `" + w + ".quantity`");
            v.quantity = detail::get_string(r[k], w, "quantity", "");
            v.reported = detail::require_number(r[k], w, "reported");
            v.note = detail::get_string(r[k], w, "note", "");
            sc.reference.push_back(std::move(v));
        }
    }

    validate(sc);
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open scenario " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_scenario(text.str());
}

/// Fully expanded document (defaults written out); parse(serialize(s)) == s.
inline nlohmann::json scenario_to_json(const Scenario& sc) {
    using detail::json;
    json doc;
    doc["name"] = sc.name;
    doc["duration"] = sc.duration;
    doc["model"] = to_token(sc.model);
    if (sc.dt_sim)
        doc["dt_sim"] = *sc.dt_sim;
    if (sc.dt_control)
        doc["dt_control"] = *sc.dt_control;
    doc["record_interval"] = sc.record_interval;
    doc["window_fraction"] = sc.window_fraction;
    doc["sources"] = {{"type", to_token(sc.sources)}};
    if (sc.sources == SourceKind::Ideal)
        doc["sources"]["voltages"] = sc.source_voltages;
    doc["panel"] = detail::panel_json(sc.panel);
    doc["circuit"] = {{"l", sc.circuit.l},
                      {"c_pv", sc.circuit.c_pv},
                      {"c_o", sc.circuit.c_o},
                      {"r_load", sc.circuit.r_load},
                      {"f_sw", sc.circuit.f_sw}};
    const auto& c = sc.control;
    json ctl{{"mode", to_token(c.kind)},
             {"d_m", c.d_m},
             {"structure", to_token(c.structure)},
             {"duties", c.duties},
             {"slots", to_token(c.slots)},
             {"thresholds",
              {{"ir_th", c.thresholds.ir_th},
               {"t_th", c.thresholds.t_th},
               {"ir_low", c.thresholds.ir_low},
               {"t_low", c.thresholds.t_low},
               {"mismatch_rel", c.thresholds.mismatch_rel}}},
             {"pi_voltage", detail::pi_json(c.pi_voltage)},
             {"pi_current", detail::pi_json(c.pi_current)}};
    ctl["pno"] = {{"period", c.pno.period}, {"v_init_frac", c.pno.v_init_frac}};
    if (c.pno.step)
        ctl["pno"]["step"] = *c.pno.step;
    doc["control"] = ctl;
    doc["atmosphere"] = json::array();
    for (const auto& a : sc.atmosphere)
        doc["atmosphere"].push_back({{"irradiance", a.irradiance}, {"temperature", a.temperature}});
    doc["events"] = json::array();
    for (const auto& e : sc.events) {
        json j{{"t", e.t}};
        if (e.structure)
            j["structure"] = to_token(*e.structure);
        if (e.duties)
            j["duties"] = *e.duties;
        if (e.slots)
            j["slots"] = to_token(*e.slots);
        if (e.channel)
            j["channel"] = *e.channel + 1;
        if (e.irradiance)
            j["irradiance"] = *e.irradiance;
        if (e.temperature)
            j["temperature"] = *e.temperature;
        doc["events"].push_back(j);
    }
    if (sc.mission_profile)
        doc["mission_profile"] = {{"path", sc.mission_profile->path},
                                  {"time_scale", sc.mission_profile->time_scale}};
    doc["reference"] = json::array();
    for (const auto& r : sc.reference)
        doc["reference"].push_back(
            {{"phase", r.phase}, {"quantity", r.quantity}, {"reported", r.reported}, {"note", r.note}});
    return doc;
}

inline std::string serialize_scenario(const Scenario& sc) { return scenario_to_json(sc).dump(2); }

}  // namespace mippv
