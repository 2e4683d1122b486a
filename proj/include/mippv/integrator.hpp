#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <string>
#include <utility>
#include <vector>

#include "mippv/converter.hpp"
#include "mippv/errors.hpp"

namespace mippv {

/// Classic explicit fourth-order Runge-Kutta step. State needs `a + b` and `h * a`.
template <class State, class Deriv>
State rk4_step(const State& x, double t, double dt, Deriv&& f) {
    const State k1 = f(t, x);
    const State k2 = f(t + 0.5 * dt, x + (0.5 * dt) * k1);
    const State k3 = f(t + 0.5 * dt, x + (0.5 * dt) * k2);
    const State k4 = f(t + dt, x + dt * k3);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Per-channel current a source delivers into its input capacitor given the
/// capacitor voltages and the current each channel's switch is drawing.
/// Stiff (ideal) sources return the draw; PV strings return I(v).
template <class Source>
concept ChannelSource = requires(Source s, const ConverterState& x, const std::vector<double>& draw) {
    { s(x, draw) } -> std::convertible_to<std::vector<double>>;
};

inline void enforce_bounds(ConverterState& x) {
    x.i_l = std::max(x.i_l, 0.0);
    for (double& v : x.v_cpv)
        v = std::max(v, 0.0);
}

inline void check_finite(const ConverterState& x, double t) {
    if (!is_finite(x))
        throw BlowUpError("integration produced a non-finite state at t = " + std::to_string(t) + " s", t);
}

/// State plus the energy delivered by the sources and dissipated in the load.
struct EnergyState {
    ConverterState x;
    double source = 0.0;
    double load = 0.0;
};

inline EnergyState operator+(EnergyState a, const EnergyState& b) {
    a.x = std::move(a.x) + b.x;
    a.source += b.source;
    a.load += b.load;
    return a;
}

inline EnergyState operator*(double h, EnergyState a) {
    a.x = h * std::move(a.x);
    a.source *= h;
    a.load *= h;
    return a;
}

struct StepResult {
    ConverterState state;
    double source_energy = 0.0;  ///< J delivered by the sources during the step
    double load_energy = 0.0;    ///< J dissipated in the load during the step
};

namespace detail {

template <class Draw, class Deriv, class Source>
StepResult energy_step(const ConverterState& x, const CircuitParams& p, Source& source, Draw&& draw_of,
                       Deriv&& deriv, double t, double dt) {
    if (!(dt > 0.0))
        throw ParameterError("integrate_step: dt must be > 0");
    auto f = [&](double, const EnergyState& s) {
        const std::vector<double> draw = draw_of(s.x);
        const std::vector<double> pv_i = source(s.x, draw);
        EnergyState d;
        d.x = deriv(s.x, pv_i);
        for (std::size_t k = 0; k < pv_i.size(); ++k)
            d.source += s.x.v_cpv[k] * pv_i[k];
        d.load = s.x.v_co * s.x.v_co / p.r_load;
        return d;
    };
    EnergyState next = rk4_step(EnergyState{x, 0.0, 0.0}, t, dt, f);
    enforce_bounds(next.x);
    check_finite(next.x, t + dt);
    return {std::move(next.x), next.source, next.load};
}

}  // namespace detail

/// One averaged-model step.
template <ChannelSource Source>
StepResult step_averaged(const ConverterState& x, const DutyCommand& cmd, const CircuitParams& p, Source&& source,
                         double t, double dt) {
    const auto sigma = draw_factors(cmd);
    auto draw_of = [&](const ConverterState& s) {
        std::vector<double> draw(sigma.size());
        for (std::size_t k = 0; k < sigma.size(); ++k)
            draw[k] = sigma[k] * std::max(s.i_l, 0.0);
        return draw;
    };
    auto deriv = [&](const ConverterState& s, const std::vector<double>& pv_i) { return derivatives(s, cmd, pv_i, p); };
    return detail::energy_step(x, p, source, draw_of, deriv, t, dt);
}

/// One switched-model step; gates sampled at the step midpoint and held.
template <ChannelSource Source>
StepResult step_switched(const ConverterState& x, const DutyCommand& cmd, const CircuitParams& p, Source&& source,
                         double t, double dt) {
    const SwitchStates g = switched_gates(t + 0.5 * dt, cmd, p);
    auto draw_of = [&](const ConverterState& s) {
        std::vector<double> draw(s.v_cpv.size(), 0.0);
        const double i_l = std::max(s.i_l, 0.0);
        if (!draw.empty() && g.s1)
            draw[0] = i_l;
        if (draw.size() > 1 && g.s2)
            draw[1] = i_l;
        return draw;
    };
    auto deriv = [&](const ConverterState& s, const std::vector<double>& pv_i) {
        return switched_derivatives(s, g, pv_i, p);
    };
    return detail::energy_step(x, p, source, draw_of, deriv, t, dt);
}

template <ChannelSource Source>
ConverterState integrate_averaged(const ConverterState& x, const DutyCommand& cmd, const CircuitParams& p,
                                  Source&& source, double t, double dt) {
    return step_averaged(x, cmd, p, source, t, dt).state;
}

template <ChannelSource Source>
ConverterState integrate_switched(const ConverterState& x, const DutyCommand& cmd, const CircuitParams& p,
                                  Source&& source, double t, double dt) {
    return step_switched(x, cmd, p, source, t, dt).state;
}

/// Sources that hold their capacitor voltage: they supply exactly what is drawn.
struct StiffSources {
    std::vector<double> operator()(const ConverterState&, const std::vector<double>& draw) const { return draw; }
};

}  // namespace mippv
