#pragma once

// Two-input programmable buck-boost power stage.
//
// Input side: one switch S_k and capacitor C_pv,k per channel, series link S_s1 and
// bypass diodes D_11/D_21 selecting the connection structure. Output side: a boost
// stage with main switch S_m, inductor L, clamping diode D, capacitor C_o and a
// resistive load.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mippv/errors.hpp"

namespace mippv {

enum class StructureKind { Parallel, Cascade, Individual };

struct ConnectionStructure {
    StructureKind kind = StructureKind::Parallel;
    std::size_t channel = 0;  ///< zero-based; meaningful for Individual only

    static constexpr ConnectionStructure parallel() { return {StructureKind::Parallel, 0}; }
    static constexpr ConnectionStructure cascade() { return {StructureKind::Cascade, 0}; }
    static constexpr ConnectionStructure individual(std::size_t k) { return {StructureKind::Individual, k}; }

    bool operator==(const ConnectionStructure& o) const {
        return kind == o.kind && (kind != StructureKind::Individual || channel == o.channel);
    }
};

/// `parallel`, `cascade`, `pv1`, `pv2`, ...
inline std::string to_token(const ConnectionStructure& s) {
    switch (s.kind) {
    case StructureKind::Parallel:
        return "parallel";
    case StructureKind::Cascade:
        return "cascade";
    case StructureKind::Individual:
        return "pv" + std::to_string(s.channel + 1);
    }
    return {};
}

inline std::optional<ConnectionStructure> parse_structure(std::string_view token, std::size_t channels = 2) {
    if (token == "parallel")
        return ConnectionStructure::parallel();
    if (token == "cascade")
        return ConnectionStructure::cascade();
    if (token.size() >= 3 && token.substr(0, 2) == "pv") {
        std::size_t k = 0;
        for (char ch : token.substr(2)) {
            if (ch < '0' || ch > '9')
                return std::nullopt;
            k = k * 10 + static_cast<std::size_t>(ch - '0');
        }
        if (k >= 1 && k <= channels)
            return ConnectionStructure::individual(k - 1);
    }
    return std::nullopt;
}

/// One row of the switch table; true = operates, false = OFF/blocked.
struct SwitchStates {
    bool s1 = false;
    bool s2 = false;
    bool ss1 = false;
    bool sm = false;
    bool d11 = false;
    bool d21 = false;

    bool operator==(const SwitchStates&) const = default;
};

inline std::string to_string(const SwitchStates& s) {
    auto mark = [](bool on) { return on ? '+' : '-'; };
    std::string out;
    out += "s1:";
    out += mark(s.s1);
    out += " s2:";
    out += mark(s.s2);
    out += " ss1:";
    out += mark(s.ss1);
    out += " sm:";
    out += mark(s.sm);
    out += " d11:";
    out += mark(s.d11);
    out += " d21:";
    out += mark(s.d21);
    return out;
}

inline SwitchStates switch_table(const ConnectionStructure& s) {
    switch (s.kind) {
    case StructureKind::Parallel:
        return {true, true, false, true, true, true};
    case StructureKind::Cascade:
        return {true, true, true, true, false, false};
    case StructureKind::Individual:
        if (s.channel == 0)
            return {true, false, false, true, true, false};
        if (s.channel == 1)
            return {false, true, false, true, false, true};
        throw ParameterError("switch_table: individual channel must be 1 or 2");
    }
    return {};
}

struct CircuitParams {
    double l = 1e-3;
    double c_pv = 470e-6;
    double c_o = 1e-3;
    double r_load = 20.0;
    double f_sw = 20e3;

    bool operator==(const CircuitParams&) const = default;
};

inline void validate(const CircuitParams& p) {
    auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!ok(p.l))
        throw ParameterError("circuit.l must be > 0");
    if (!ok(p.c_pv))
        throw ParameterError("circuit.c_pv must be > 0");
    if (!ok(p.c_o))
        throw ParameterError("circuit.c_o must be > 0");
    if (!ok(p.r_load))
        throw ParameterError("circuit.r_load must be > 0");
    if (!ok(p.f_sw))
        throw ParameterError("circuit.f_sw must be > 0");
}

struct ConverterState {
    double i_l = 0.0;
    std::vector<double> v_cpv;
    double v_co = 0.0;

    bool operator==(const ConverterState&) const = default;
};

inline ConverterState operator+(ConverterState a, const ConverterState& b) {
    a.i_l += b.i_l;
    a.v_co += b.v_co;
    for (std::size_t k = 0; k < a.v_cpv.size(); ++k)
        a.v_cpv[k] += b.v_cpv[k];
    return a;
}

inline ConverterState operator*(double h, ConverterState a) {
    a.i_l *= h;
    a.v_co *= h;
    for (double& v : a.v_cpv)
        v *= h;
    return a;
}

inline bool is_finite(const ConverterState& s) {
    if (!std::isfinite(s.i_l) || !std::isfinite(s.v_co))
        return false;
    for (double v : s.v_cpv)
        if (!std::isfinite(v))
            return false;
    return true;
}

/// Stored energy of L, the input capacitors and C_o.
inline double stored_energy(const ConverterState& s, const CircuitParams& p) {
    double e = 0.5 * p.l * s.i_l * s.i_l + 0.5 * p.c_o * s.v_co * s.v_co;
    for (double v : s.v_cpv)
        e += 0.5 * p.c_pv * v * v;
    return e;
}

/// How the input switches share a switching period in the parallel structure.
/// Alternating: S1 then S2, non-overlapping (sum of duties <= 1).
/// Shared: followers copy the leader's duty.
enum class SlotMode { Alternating, Shared };

struct DutyCommand {
    std::vector<double> d;
    double d_m = 0.5;
    ConnectionStructure structure;
    SlotMode slots = SlotMode::Alternating;

    bool operator==(const DutyCommand&) const = default;
};

inline constexpr double kMaxBoostDuty = 0.95;
inline constexpr double kDutySumSlack = 1e-12;

inline void validate(const DutyCommand& cmd, std::size_t channels) {
    if (cmd.d.size() != channels)
        throw ParameterError("duty command: expected " + std::to_string(channels) + " channel duties");
    for (double d : cmd.d)
        if (!(d >= 0.0 && d <= 1.0))
            throw ConstraintError("duty command: channel duty outside [0, 1]");
    if (!(cmd.d_m >= 0.0 && cmd.d_m <= kMaxBoostDuty))
        throw ConstraintError("duty command: d_m outside [0, 0.95]");
    switch (cmd.structure.kind) {
    case StructureKind::Parallel:
        if (cmd.slots == SlotMode::Alternating) {
            double sum = 0.0;
            for (double d : cmd.d)
                sum += d;
            if (sum > 1.0 + kDutySumSlack)
                throw ConstraintError("duty command: alternating parallel duties sum above 1");
        }
        break;
    case StructureKind::Cascade:
        for (double d : cmd.d)
            if (d != cmd.d.front())
                throw ConstraintError("duty command: cascade requires a common duty");
        break;
    case StructureKind::Individual:
        if (cmd.structure.channel >= channels)
            throw ParameterError("duty command: individual channel out of range");
        break;
    }
}

/// Cycle-averaged fraction of the inductor current drawn from each input capacitor.
inline std::vector<double> draw_factors(const DutyCommand& cmd) {
    std::vector<double> sigma(cmd.d.size(), 0.0);
    switch (cmd.structure.kind) {
    case StructureKind::Parallel:
        sigma = cmd.d;
        break;
    case StructureKind::Cascade:
        for (double& s : sigma)
            s = cmd.d.empty() ? 0.0 : cmd.d.front();
        break;
    case StructureKind::Individual:
        if (cmd.structure.channel < sigma.size())
            sigma[cmd.structure.channel] = cmd.d[cmd.structure.channel];
        break;
    }
    return sigma;
}

inline double effective_input_voltage(const std::vector<double>& v_cpv, const DutyCommand& cmd) {
    validate(cmd, v_cpv.size());
    const auto sigma = draw_factors(cmd);
    double v = 0.0;
    for (std::size_t k = 0; k < v_cpv.size(); ++k)
        v += sigma[k] * v_cpv[k];
    return v;
}

inline double effective_input_voltage(const ConverterState& s, const DutyCommand& cmd) {
    return effective_input_voltage(s.v_cpv, cmd);
}

namespace detail {

inline void apply_clamps(const ConverterState& s, ConverterState& dx) {
    // Clamping diode blocks reverse inductor current.
    if (s.i_l <= 0.0 && dx.i_l < 0.0)
        dx.i_l = 0.0;
    // Bypass path keeps input capacitors from reverse-charging.
    for (std::size_t k = 0; k < s.v_cpv.size(); ++k)
        if (s.v_cpv[k] <= 0.0 && dx.v_cpv[k] < 0.0)
            dx.v_cpv[k] = 0.0;
}

}  // namespace detail

/// State-space averaged dynamics. The command is assumed valid (see validate()).
inline ConverterState derivatives(const ConverterState& s, const DutyCommand& cmd, const std::vector<double>& pv_i,
                                  const CircuitParams& p) {
    const auto sigma = draw_factors(cmd);
    const double i_l = std::max(s.i_l, 0.0);
    ConverterState dx;
    dx.v_cpv.resize(s.v_cpv.size());
    double v_in = 0.0;
    for (std::size_t k = 0; k < s.v_cpv.size(); ++k) {
        v_in += sigma[k] * s.v_cpv[k];
        dx.v_cpv[k] = (pv_i[k] - sigma[k] * i_l) / p.c_pv;
    }
    const double off = 1.0 - cmd.d_m;
    dx.i_l = (v_in - off * s.v_co) / p.l;
    dx.v_co = (off * i_l - s.v_co / p.r_load) / p.c_o;
    detail::apply_clamps(s, dx);
    return dx;
}

/// Instantaneous gate pattern of a carrier-based PWM at time t.
inline SwitchStates switched_gates(double t, const DutyCommand& cmd, const CircuitParams& p) {
    if (!(p.f_sw > 0.0))
        throw ParameterError("switched_gates: f_sw must be > 0");
    validate(cmd, cmd.d.size());
    if (cmd.structure.kind == StructureKind::Parallel && cmd.d.size() >= 2 && cmd.d[0] + cmd.d[1] > 1.0 + kDutySumSlack)
        throw ConstraintError("switched_gates: parallel slots need d1 + d2 <= 1");
    const double cycles = t * p.f_sw;
    const double phase = cycles - std::floor(cycles);
    const SwitchStates table = switch_table(cmd.structure);
    SwitchStates g;
    g.ss1 = table.ss1;
    switch (cmd.structure.kind) {
    case StructureKind::Parallel:
        g.s1 = phase < cmd.d[0];
        g.s2 = cmd.d.size() > 1 && phase >= cmd.d[0] && phase < cmd.d[0] + cmd.d[1];
        break;
    case StructureKind::Cascade:
        g.s1 = g.s2 = phase < cmd.d[0];
        break;
    case StructureKind::Individual:
        if (cmd.structure.channel == 0)
            g.s1 = phase < cmd.d[0];
        else
            g.s2 = phase < cmd.d[1];
        break;
    }
    g.sm = phase < cmd.d_m;
    g.d11 = table.d11 && !g.s1;
    g.d21 = table.d21 && !g.s2;
    return g;
}

/// Piecewise-constant dynamics under a fixed gate pattern.
inline ConverterState switched_derivatives(const ConverterState& s, const SwitchStates& g,
                                           const std::vector<double>& pv_i, const CircuitParams& p) {
    const double i_l = std::max(s.i_l, 0.0);
    const bool on[2] = {g.s1, g.s2};
    ConverterState dx;
    dx.v_cpv.resize(s.v_cpv.size());
    double v_front = 0.0;
    for (std::size_t k = 0; k < s.v_cpv.size(); ++k) {
        const bool conducting = k < 2 && on[k];
        if (conducting)
            v_front += s.v_cpv[k];
        dx.v_cpv[k] = (pv_i[k] - (conducting ? i_l : 0.0)) / p.c_pv;
    }
    dx.i_l = (v_front - (g.sm ? 0.0 : s.v_co)) / p.l;
    dx.v_co = ((g.sm ? 0.0 : i_l) - s.v_co / p.r_load) / p.c_o;
    detail::apply_clamps(s, dx);
    return dx;
}

struct SteadyState {
    double v_o = 0.0;
    double i_o = 0.0;
    double i_l = 0.0;
    std::vector<double> i_in;  ///< per-channel average source current
};

/// Lossless averaged operating point with stiff sources.
inline SteadyState steady_state(const ConnectionStructure& structure, const std::vector<double>& v_in,
                                DutyCommand cmd, const CircuitParams& p) {
    if (cmd.d_m >= 1.0)
        throw SingularityError("steady_state: d_m >= 1 has no steady state");
    validate(p);
    cmd.structure = structure;
    const double v_eff = effective_input_voltage(v_in, cmd);
    SteadyState ss;
    ss.v_o = v_eff / (1.0 - cmd.d_m);
    ss.i_o = ss.v_o / p.r_load;
    ss.i_l = ss.i_o / (1.0 - cmd.d_m);
    const auto sigma = draw_factors(cmd);
    for (double s : sigma)
        ss.i_in.push_back(s * ss.i_l);
    return ss;
}

}  // namespace mippv
