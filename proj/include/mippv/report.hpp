#pragma once

// Run summaries as JSON and as a fixed-width text table.

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mippv/engine.hpp"

namespace mippv {

namespace detail {

inline nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::string fixed(double v, int prec = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

inline std::string pad(const std::string& s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

}  // namespace detail

inline nlohmann::json summary_to_json(const Summary& s) {
    using nlohmann::json;
    json doc;
    doc["scenario"] = s.scenario;
    doc["duration"] = s.duration;
    doc["source_energy"] = s.source_energy;
    doc["delivered_energy"] = s.delivered_energy;
    doc["stored_energy_delta"] = s.stored_energy_delta;
    doc["mppt_efficiency"] = json::array();
    for (const auto& e : s.mppt_efficiency)
        doc["mppt_efficiency"].push_back(detail::optional_json(e));
    doc["phases"] = json::array();
    for (const auto& p : s.phases) {
        json j{{"t_start", p.t_start}, {"t_end", p.t_end}, {"window_start", p.window_start}, {"mode", p.mode},
               {"v_o", p.v_o},         {"i_o", p.i_o},     {"i_l", p.i_l},                   {"p_o", p.p_o},
               {"v_pv", p.v_pv},       {"i_pv", p.i_pv},   {"p_pv", p.p_pv}};
        j["p_mpp"] = json::array();
        for (const auto& m : p.p_mpp)
            j["p_mpp"].push_back(detail::optional_json(m));
        doc["phases"].push_back(j);
    }
    doc["timeline"] = json::array();
    for (const auto& m : s.timeline)
        doc["timeline"].push_back({{"t_start", m.t}, {"mode", m.mode}});
    doc["reference"] = json::array();
    for (const auto& r : s.reference)
        doc["reference"].push_back({{"phase", r.phase},
                                    {"quantity", r.quantity},
                                    {"reported", r.reported},
                                    {"simulated", r.simulated},
                                    {"agrees", r.agrees},
                                    {"note", r.note}});
    return doc;
}

inline std::string summary_to_text(const Summary& s) {
    using detail::fixed;
    using detail::pad;
    std::ostringstream out;
    out << "scenario: " << (s.scenario.empty() ? "(unnamed)" : s.scenario) << "\n";
    out << "duration: " << fixed(s.duration, 4) << " s\n\n";
    out << "phase  t_start    t_end  mode                    v_o      i_o      i_l    i_pv1    i_pv2    p_pv1    "
           "p_pv2\n";
    for (std::size_t k = 0; k < s.phases.size(); ++k) {
        const auto& p = s.phases[k];
        std::string mode = p.mode;
        mode.resize(20, ' ');
        out << pad(std::to_string(k + 1), 5) << pad(fixed(p.t_start, 4), 9) << pad(fixed(p.t_end, 4), 9) << "  "
            << mode << pad(fixed(p.v_o), 9) << pad(fixed(p.i_o), 9) << pad(fixed(p.i_l), 9)
            << pad(fixed(p.i_pv[0]), 9) << pad(fixed(p.i_pv[1]), 9) << pad(fixed(p.p_pv[0], 1), 9)
            << pad(fixed(p.p_pv[1], 1), 9) << "\n";
    }
    out << "\nsource energy:    " << fixed(s.source_energy, 3) << " J\n";
    out << "delivered energy: " << fixed(s.delivered_energy, 3) << " J\n";
    out << "stored delta:     " << fixed(s.stored_energy_delta, 3) << " J\n";
    for (std::size_t k = 0; k < s.mppt_efficiency.size(); ++k)
        if (s.mppt_efficiency[k])
            out << "mppt efficiency pv" << k + 1 << ": " << fixed(*s.mppt_efficiency[k], 4) << "\n";
    out << "\nmode timeline:\n";
    for (const auto& m : s.timeline)
        out << "  " << pad(fixed(m.t, 4), 9) << " s  " << m.mode << "\n";
    if (!s.reference.empty()) {
        out << "\nreference comparison (agreement within 2%):\n";
        out << "phase  quantity     reported   simulated  agrees  note\n";
        for (const auto& r : s.reference) {
            std::string q = r.quantity;
            q.resize(10, ' ');
            out << pad(std::to_string(r.phase), 5) << "  " << q << pad(fixed(r.reported), 10)
                << pad(fixed(r.simulated), 12) << "  " << (r.agrees ? "yes   " : "NO    ") << r.note << "\n";
        }
    }
    return out.str();
}

}  // namespace mippv
