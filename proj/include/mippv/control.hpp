#pragma once

// Control stack: operating-mode selection from measured irradiance/temperature,
// perturb-and-observe voltage reference, cascaded voltage/current PI loops and
// leader/follower duty assignment.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mippv/converter.hpp"
#include "mippv/errors.hpp"
#include "mippv/pv_model.hpp"

namespace mippv {

struct Thresholds {
    double ir_th = 800.0;     ///< W/m^2, cascade above this
    double t_th = 45.0;       ///< degC, full-MPPT parallel below this
    double ir_low = 100.0;    ///< W/m^2, shading test
    double t_low = 0.0;       ///< degC, shading test
    double mismatch_rel = 0.1;

    bool operator==(const Thresholds&) const = default;
};

inline void validate(const Thresholds& th) {
    if (!(th.ir_low < th.ir_th))
        throw ParameterError("thresholds: ir_low must be below ir_th");
    if (!(th.t_low < th.t_th))
        throw ParameterError("thresholds: t_low must be below t_th");
    if (!(th.mismatch_rel > 0.0 && th.mismatch_rel < 1.0))
        throw ParameterError("thresholds: mismatch_rel must lie in (0, 1)");
}

enum class Regime { ParallelFullMppt, ParallelMismatch, Cascade, Individual };

inline std::string to_token(Regime r) {
    switch (r) {
    case Regime::ParallelFullMppt:
        return "parallel_full_mppt";
    case Regime::ParallelMismatch:
        return "parallel_mismatch";
    case Regime::Cascade:
        return "cascade";
    case Regime::Individual:
        return "individual";
    }
    return {};
}

struct OperatingMode {
    Regime regime = Regime::ParallelFullMppt;
    ConnectionStructure structure;
    std::size_t leader = 0;
    std::vector<std::size_t> active;

    bool operator==(const OperatingMode&) const = default;
};

/// Waveform/timeline token; an individual regime carries its channel (`individual_pv1`).
inline std::string mode_token(const OperatingMode& m) {
    if (m.regime == Regime::Individual)
        return "individual_pv" + std::to_string(m.leader + 1);
    return to_token(m.regime);
}

/// A channel is unshaded when Ir > ir_low or T > t_low.
inline bool unshaded(const AtmosphereSample& a, const Thresholds& th) {
    return a.irradiance > th.ir_low || a.temperature > th.t_low;
}

/// Highest irradiance, ties to the lower index.
inline std::size_t best_channel(std::span<const AtmosphereSample> atmos) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < atmos.size(); ++k)
        if (atmos[k].irradiance > atmos[best].irradiance)
            best = k;
    return best;
}

/// Decision precedence: single unshaded channel > high irradiance (cascade) >
/// matched and cool (parallel, full MPPT) > parallel with a leader.
inline OperatingMode select_mode(std::span<const AtmosphereSample> atmos, const Thresholds& th) {
    if (atmos.empty())
        throw ParameterError("select_mode: no channels");
    const std::size_t n = atmos.size();
    std::vector<std::size_t> all(n);
    for (std::size_t k = 0; k < n; ++k)
        all[k] = k;

    std::vector<std::size_t> clear;
    for (std::size_t k = 0; k < n; ++k)
        if (unshaded(atmos[k], th))
            clear.push_back(k);

    OperatingMode m;
    if (n > 1 && clear.size() == 1) {
        m.regime = Regime::Individual;
        m.leader = clear.front();
        m.structure = ConnectionStructure::individual(m.leader);
        m.active = {m.leader};
        return m;
    }

    const std::size_t best = best_channel(atmos);
    m.leader = best;
    m.active = all;
    if (atmos[best].irradiance > th.ir_th) {
        m.regime = Regime::Cascade;
        m.structure = ConnectionStructure::cascade();
        return m;
    }

    double ir_min = atmos[0].irradiance;
    bool cool = true;
    for (const auto& a : atmos) {
        ir_min = std::min(ir_min, a.irradiance);
        cool = cool && a.temperature < th.t_th;
    }
    const double ir_max = atmos[best].irradiance;
    const double spread = ir_max > 0.0 ? (ir_max - ir_min) / ir_max : 0.0;
    const bool matched = spread <= th.mismatch_rel;
    m.structure = ConnectionStructure::parallel();
    m.regime = (cool && matched && clear.size() == n) ? Regime::ParallelFullMppt : Regime::ParallelMismatch;
    return m;
}

// ---------------------------------------------------------------------------
// Perturb and observe

struct PnoState {
    double v_ref = 0.0;
    double step = 1.0;
    double last_power = 0.0;
    double last_voltage = 0.0;
    int direction = 1;

    bool operator==(const PnoState&) const = default;
};

/// One hill-climbing step: keep direction while power rises, otherwise reverse.
inline PnoState perturb_observe(PnoState st, double v_meas, double p_meas, double v_limit) {
    if (!(p_meas > st.last_power))
        st.direction = -st.direction;
    st.v_ref = std::clamp(st.v_ref + st.direction * st.step, 0.0, std::max(v_limit, 0.0));
    st.last_power = p_meas;
    st.last_voltage = v_meas;
    return st;
}

// ---------------------------------------------------------------------------
// PI with output saturation and conditional integration

struct PiState {
    double kp = 0.0;
    double ki = 0.0;
    double integrator = 0.0;
    double out_min = 0.0;
    double out_max = 1.0;

    bool operator==(const PiState&) const = default;

    double step(double error, double dt) {
        const double candidate = integrator + ki * error * dt;
        const double unsat = kp * error + candidate;
        const bool pushing_high = unsat > out_max && error > 0.0;
        const bool pushing_low = unsat < out_min && error < 0.0;
        if (pushing_high)
            integrator = std::max(integrator, out_max - kp * error);
        else if (pushing_low)
            integrator = std::min(integrator, out_min - kp * error);
        else
            integrator = candidate;
        integrator = std::clamp(integrator, out_min, out_max);
        return std::clamp(kp * error + integrator, out_min, out_max);
    }
};

struct DualLoopResult {
    PiState voltage;
    PiState current;
    double i_ref = 0.0;
    double duty = 0.0;
};

/// Outer loop: i_ref = PI_v(v_meas - v_ref). Raising a channel's duty draws more
/// current and lowers its capacitor voltage, hence the error sign.
/// Inner loop: duty = PI_c(i_ref - i_meas).
inline DualLoopResult dual_loop_step(PiState pi_v, PiState pi_c, double v_ref, double v_meas, double i_meas,
                                     double dt) {
    if (!(dt > 0.0))
        throw ParameterError("dual_loop_step: dt must be > 0");
    DualLoopResult r;
    r.i_ref = pi_v.step(v_meas - v_ref, dt);
    r.duty = pi_c.step(r.i_ref - i_meas, dt);
    r.voltage = pi_v;
    r.current = pi_c;
    return r;
}

// ---------------------------------------------------------------------------
// Duty assignment

inline DutyCommand assign_duties(const OperatingMode& mode, double leader_duty, std::span<const double> duties,
                                 double d_m) {
    DutyCommand cmd;
    cmd.d.assign(duties.begin(), duties.end());
    cmd.d_m = d_m;
    cmd.structure = mode.structure;
    for (double& d : cmd.d)
        d = std::clamp(d, 0.0, 1.0);
    leader_duty = std::clamp(leader_duty, 0.0, 1.0);

    switch (mode.regime) {
    case Regime::ParallelFullMppt: {
        cmd.slots = SlotMode::Alternating;
        double sum = 0.0;
        for (double d : cmd.d)
            sum += d;
        if (sum > 1.0)
            for (double& d : cmd.d)
                d /= sum;
        break;
    }
    case Regime::ParallelMismatch:
    case Regime::Cascade:
        cmd.slots = SlotMode::Shared;
        std::fill(cmd.d.begin(), cmd.d.end(), 0.0);
        for (std::size_t k : mode.active)
            cmd.d[k] = leader_duty;
        break;
    case Regime::Individual:
        std::fill(cmd.d.begin(), cmd.d.end(), 0.0);
        cmd.d[mode.leader] = leader_duty;
        break;
    }
    return cmd;
}

}  // namespace mippv
