#pragma once

// Scenario description consumed by the simulation engine.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mippv/control.hpp"
#include "mippv/converter.hpp"
#include "mippv/errors.hpp"
#include "mippv/pv_model.hpp"

namespace mippv {

enum class ModelKind { Averaged, Switched };
enum class SourceKind { Ideal, PvString };
enum class ControlKind { Fixed, Mppt };

inline constexpr std::size_t kChannels = 2;
inline constexpr double kDefaultAveragedStep = 10e-6;
inline constexpr double kDefaultControlStep = 20e-6;
inline constexpr double kDefaultRecordInterval = 1e-4;

struct PiConfig {
    double kp = 0.0;
    double ki = 0.0;
    double out_min = 0.0;
    double out_max = 1.0;

    bool operator==(const PiConfig&) const = default;
    PiState state() const { return {kp, ki, 0.0, out_min, out_max}; }
};

struct PnoConfig {
    double period = 1e-3;
    std::optional<double> step;  ///< volts; default 0.5 % of the string STC Voc
    double v_init_frac = 0.8;

    bool operator==(const PnoConfig&) const = default;
};

struct ControlConfig {
    ControlKind kind = ControlKind::Mppt;
    double d_m = 0.5;
    // fixed-duty operation
    ConnectionStructure structure = ConnectionStructure::parallel();
    std::vector<double> duties{0.5, 0.5};
    SlotMode slots = SlotMode::Alternating;
    // MPPT operation
    Thresholds thresholds;
    PnoConfig pno;
    PiConfig pi_voltage{0.6, 300.0, 0.0, 15.0};
    PiConfig pi_current{0.01, 200.0, 0.0, 1.0};

    bool operator==(const ControlConfig&) const = default;
};

/// Timed change; any subset of the optional fields may be present.
struct Event {
    double t = 0.0;
    std::optional<ConnectionStructure> structure;
    std::optional<std::vector<double>> duties;
    std::optional<SlotMode> slots;
    std::optional<std::size_t> channel;  ///< zero-based; target of the atmosphere fields
    std::optional<double> irradiance;
    std::optional<double> temperature;

    bool operator==(const Event&) const = default;
};

struct MissionProfileRef {
    std::string path;
    double time_scale = 1.0;  ///< profile time = simulation time * time_scale

    bool operator==(const MissionProfileRef&) const = default;
};

/// A published figure the run is compared against; phase is one-based.
struct ReferenceValue {
    std::size_t phase = 1;
    std::string quantity;
    double reported = 0.0;
    std::string note;

    bool operator==(const ReferenceValue&) const = default;
};

struct Scenario {
    std::string name;
    double duration = 0.0;
    ModelKind model = ModelKind::Averaged;
    std::optional<double> dt_sim;
    std::optional<double> dt_control;
    double record_interval = kDefaultRecordInterval;
    double window_fraction = 0.5;  ///< trailing share of each phase used for steady-state means
    SourceKind sources = SourceKind::PvString;
    std::vector<double> source_voltages;
    PanelDatasheet panel;
    CircuitParams circuit;
    ControlConfig control;
    std::vector<AtmosphereSample> atmosphere{kChannels};
    std::vector<Event> events;
    std::optional<MissionProfileRef> mission_profile;
    std::vector<ReferenceValue> reference;

    bool operator==(const Scenario&) const = default;

    double sim_step() const {
        if (dt_sim)
            return *dt_sim;
        return model == ModelKind::Averaged ? kDefaultAveragedStep : 1.0 / (100.0 * circuit.f_sw);
    }
    double control_step() const { return dt_control ? *dt_control : std::max(kDefaultControlStep, sim_step()); }
};

inline std::string to_token(ModelKind m) { return m == ModelKind::Averaged ? "averaged" : "switched"; }
inline std::string to_token(SourceKind s) { return s == SourceKind::Ideal ? "ideal" : "pv"; }
inline std::string to_token(ControlKind c) { return c == ControlKind::Fixed ? "fixed" : "mppt"; }
inline std::string to_token(SlotMode s) { return s == SlotMode::Alternating ? "alternating" : "shared"; }

namespace detail {

/// Number of `fine` steps in `coarse`; throws unless it is a whole number.
inline long long step_ratio(double coarse, double fine, const std::string& what) {
    const double r = coarse / fine;
    const long long n = std::llround(r);
    if (n < 1 || std::abs(r - static_cast<double>(n)) > 1e-6 * r)
        throw ConfigError(what + ": must be a whole multiple of the simulation step");
    return n;
}

}  // namespace detail

/// Checks every cross-field invariant; messages name the key.
inline void validate(const Scenario& sc) {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!(std::isfinite(sc.duration) && sc.duration >= 0.0))
        throw ConfigError("duration: must be >= 0");
    const double dt = sc.sim_step();
    if (!positive(dt))
        throw ConfigError("dt_sim: must be > 0");
    if (!positive(sc.control_step()))
        throw ConfigError("dt_control: must be > 0");
    if (dt > sc.control_step() * (1.0 + 1e-12))
        throw ConfigError("dt_sim: must not exceed dt_control");
    try {
        validate(sc.circuit);
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    if (sc.model == ModelKind::Switched && dt > 1.0 / (50.0 * sc.circuit.f_sw) * (1.0 + 1e-12))
        throw ConfigError("dt_sim: switched model requires dt_sim <= 1/(50 f_sw)");
    detail::step_ratio(sc.control_step(), dt, "dt_control");
    detail::step_ratio(sc.record_interval, dt, "record_interval");
    if (!(sc.window_fraction > 0.0 && sc.window_fraction <= 1.0))
        throw ConfigError("window_fraction: must lie in (0, 1]");

    if (sc.sources == SourceKind::Ideal) {
        if (sc.source_voltages.size() != kChannels)
            throw ConfigError("sources.voltages: expected 2 values");
        for (double v : sc.source_voltages)
            if (!(std::isfinite(v) && v >= 0.0))
                throw ConfigError("sources.voltages: must be finite and >= 0");
        if (sc.control.kind != ControlKind::Fixed)
            throw ConfigError("control.mode: ideal sources require fixed duties");
        if (sc.mission_profile)
            throw ConfigError("mission_profile: only valid with pv sources");
    } else {
        try {
            validate_datasheet(sc.panel);
        } catch (const ParameterError& e) {
            throw ConfigError(e.what());
        }
    }

    const auto& c = sc.control;
    if (!(c.d_m >= 0.0 && c.d_m <= kMaxBoostDuty))
        throw ConfigError("control.d_m: must lie in [0, 0.95] (boost-duty bound)");
    if (c.kind == ControlKind::Fixed) {
        try {
            validate(DutyCommand{c.duties, c.d_m, c.structure, c.slots}, kChannels);
        } catch (const Error& e) {
            throw ConfigError(std::string("control.duties: ") + e.what());
        }
    } else {
        try {
            validate(c.thresholds);
        } catch (const ParameterError& e) {
            throw ConfigError(std::string("control.") + e.what());
        }
        if (!positive(c.pno.period))
            throw ConfigError("control.pno.period: must be > 0");
        detail::step_ratio(c.pno.period, sc.control_step(), "control.pno.period");
        if (c.pno.step && !positive(*c.pno.step))
            throw ConfigError("control.pno.step: must be > 0");
        if (!(c.pno.v_init_frac > 0.0 && c.pno.v_init_frac <= 1.0))
            throw ConfigError("control.pno.v_init_frac: must lie in (0, 1]");
        for (const auto* pi : {&c.pi_voltage, &c.pi_current}) {
            const std::string key = pi == &c.pi_voltage ? "control.pi_voltage" : "control.pi_current";
            if (!(std::isfinite(pi->kp) && pi->kp >= 0.0 && std::isfinite(pi->ki) && pi->ki >= 0.0))
                throw ConfigError(key + ": gains must be finite and >= 0");
            if (!(pi->out_min < pi->out_max))
                throw ConfigError(key + ": min must be below max");
        }
        if (c.pi_current.out_min < 0.0 || c.pi_current.out_max > 1.0)
            throw ConfigError("control.pi_current: duty limits must lie in [0, 1]");
    }

    if (sc.atmosphere.size() != kChannels)
        throw ConfigError("atmosphere: expected 2 channel entries");
    for (const auto& a : sc.atmosphere) {
        try {
            validate(a);
        } catch (const ParameterError& e) {
            throw ConfigError(e.what());
        }
    }

    double last = 0.0;
    for (std::size_t k = 0; k < sc.events.size(); ++k) {
        const auto& e = sc.events[k];
        const std::string key = "events[" + std::to_string(k) + "]";
        if (!(std::isfinite(e.t) && e.t >= 0.0))
            throw ConfigError(key + ".t: must be >= 0");
        if (e.t < last)
            throw ConfigError(key + ".t: events must be sorted by time");
        last = e.t;
        const bool electrical = e.structure || e.duties || e.slots;
        const bool weather = e.irradiance || e.temperature;
        if (!electrical && !weather)
            throw ConfigError(key + ": event changes nothing");
        if (electrical && c.kind != ControlKind::Fixed)
            throw ConfigError(key + ": structure/duty events need control.mode fixed");
        if (weather) {
            if (!e.channel || *e.channel >= kChannels)
                throw ConfigError(key + ".channel: must be 1 or 2");
            if (sc.mission_profile)
                throw ConfigError(key + ": atmosphere events conflict with mission_profile");
            if (e.irradiance && !(std::isfinite(*e.irradiance) && *e.irradiance >= 0.0))
                throw ConfigError(key + ".irradiance: must be >= 0");
            if (e.temperature && !(*e.temperature >= -40.0 && *e.temperature <= 90.0))
                throw ConfigError(key + ".temperature: must lie in [-40, 90]");
        }
    }
    if (c.kind == ControlKind::Fixed) {
        DutyCommand cmd{c.duties, c.d_m, c.structure, c.slots};
        for (std::size_t k = 0; k < sc.events.size(); ++k) {
            const auto& e = sc.events[k];
            if (e.structure)
                cmd.structure = *e.structure;
            if (e.duties)
                cmd.d = *e.duties;
            if (e.slots)
                cmd.slots = *e.slots;
            try {
                validate(cmd, kChannels);
            } catch (const Error& err) {
                throw ConfigError("events[" + std::to_string(k) + "].duties: " + err.what());
            }
        }
    }
    if (sc.mission_profile && !(sc.mission_profile->time_scale > 0.0))
        throw ConfigError("mission_profile.time_scale: must be > 0");
    static const std::vector<std::string> quantities{"v_o",   "i_o",   "i_l",   "p_o",   "v_pv1",
                                                     "v_pv2", "i_pv1", "i_pv2", "p_pv1", "p_pv2"};
    for (const auto& r : sc.reference) {
        if (r.phase < 1)
            throw ConfigError("reference.phase: phases are numbered from 1");
        if (std::find(quantities.begin(), quantities.end(), r.quantity) == quantities.end())
            throw ConfigError("reference.quantity: unknown quantity `" + r.quantity + "`");
    }
}

}  // namespace mippv
