#pragma once

// Single-diode PV panel / series-string model.
//
//   I = Iph - I0 * (exp((V + I*Rs) / a) - 1) - (V + I*Rs) / Rsh,   a = n * Ns * k * T / q
//
// evaluated per panel; a string of identical panels carries the panel current at
// panels_in_series times the panel voltage.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "mippv/errors.hpp"

namespace mippv {

inline constexpr double kBoltzmann = 1.380649e-23;
inline constexpr double kElectronCharge = 1.602176634e-19;
inline constexpr double kStcIrradiance = 1000.0;
inline constexpr double kStcTemperature = 25.0;

/// Current tolerance of the per-voltage root solve.
inline constexpr double kCurrentTolerance = 1e-9;

struct AtmosphereSample {
    double irradiance = kStcIrradiance;  ///< W/m^2
    double temperature = kStcTemperature;  ///< cell temperature, degC

    bool operator==(const AtmosphereSample&) const = default;
};

inline void validate(const AtmosphereSample& a) {
    if (!std::isfinite(a.irradiance) || a.irradiance < 0.0)
        throw ParameterError("atmosphere: irradiance must be finite and >= 0");
    if (!std::isfinite(a.temperature) || a.temperature < -40.0 || a.temperature > 90.0)
        throw ParameterError("atmosphere: temperature must lie in [-40, 90] degC");
}

/// Datasheet block of a panel at STC, plus string composition.
struct PanelDatasheet {
    double isc = 8.9;
    double voc = 22.4;
    double vmp = 18.2;
    double imp = 8.25;
    double alpha_isc = 0.0045;  ///< A/degC
    double beta_voc = -0.078;   ///< V/degC
    int cells_in_series = 36;
    int panels_in_series = 12;

    bool operator==(const PanelDatasheet&) const = default;
};

struct PanelParams {
    double isc_stc = 0.0;
    double voc_stc = 0.0;
    double vmp_stc = 0.0;
    double imp_stc = 0.0;
    double alpha_isc = 0.0;
    double beta_voc = 0.0;
    double ideality = 1.3;
    double r_series = 0.0;  ///< per panel
    double r_shunt = std::numeric_limits<double>::infinity();  ///< per panel
    int cells_in_series = 36;
    int panels_in_series = 1;

    double rated_power() const { return vmp_stc * imp_stc; }
    bool operator==(const PanelParams&) const = default;
};

inline void validate_datasheet(const PanelDatasheet& d) {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!(finite(d.isc) && finite(d.voc) && finite(d.vmp) && finite(d.imp) && finite(d.alpha_isc) &&
          finite(d.beta_voc)))
        throw ParameterError("panel: datasheet values must be finite");
    if (!(d.vmp > 0.0 && d.vmp < d.voc))
        throw ParameterError("panel: requires 0 < vmp < voc");
    if (!(d.imp > 0.0 && d.imp < d.isc))
        throw ParameterError("panel: requires 0 < imp < isc");
    if (d.cells_in_series < 1 || d.panels_in_series < 1)
        throw ParameterError("panel: cell and panel counts must be >= 1");
}

inline void validate(const PanelParams& p) {
    validate_datasheet({p.isc_stc, p.voc_stc, p.vmp_stc, p.imp_stc, p.alpha_isc, p.beta_voc,
                        p.cells_in_series, p.panels_in_series});
    if (!std::isfinite(p.r_series) || p.r_series < 0.0)
        throw ParameterError("panel: r_series must be >= 0");
    if (std::isnan(p.r_shunt) || p.r_shunt <= 0.0)
        throw ParameterError("panel: r_shunt must be > 0");
    if (!(p.ideality >= 1.0 && p.ideality <= 2.0))
        throw ParameterError("panel: ideality must lie in [1, 2]");
}

inline double thermal_voltage(double temperature_c) {
    return kBoltzmann * (temperature_c + 273.15) / kElectronCharge;
}

/// Model coefficients of one panel under a fixed atmosphere.
struct PanelConditions {
    double iph = 0.0;
    double i0 = 0.0;
    double a = 1.0;       ///< modified ideality voltage n*Ns*Vt
    double rs = 0.0;
    double g_shunt = 0.0;  ///< 1 / Rsh
    int panels = 1;
    double voc_panel = 0.0;

    double voc_string() const { return voc_panel * panels; }
};

namespace detail {

/// Panel current at panel voltage v; 0 at and beyond open circuit.
inline double panel_current(const PanelConditions& c, double v, double tol = kCurrentTolerance) {
    auto residual = [&](double i) {
        const double vd = v + i * c.rs;
        return c.iph - c.i0 * std::expm1(vd / c.a) - vd * c.g_shunt - i;
    };
    if (c.iph <= 0.0 || residual(0.0) <= 0.0)
        return 0.0;
    if (c.rs == 0.0)
        return residual(0.0);
    std::uintmax_t iters = 200;
    auto stop = [tol](double lo, double hi) { return std::abs(hi - lo) <= tol; };
    const auto [lo, hi] = boost::math::tools::toms748_solve(residual, 0.0, c.iph, stop, iters);
    return 0.5 * (lo + hi);
}

/// dI/dV of the panel at (v, i) from implicit differentiation.
inline double panel_slope(const PanelConditions& c, double v, double i) {
    const double gd = c.i0 / c.a * std::exp((v + i * c.rs) / c.a);
    const double g = gd + c.g_shunt;
    return -g / (1.0 + c.rs * g);
}

inline double panel_open_circuit(const PanelConditions& c) {
    if (c.iph <= 0.0)
        return 0.0;
    auto residual = [&](double v) { return c.iph - c.i0 * std::expm1(v / c.a) - v * c.g_shunt; };
    const double hi = c.a * std::log1p(c.iph / c.i0);
    std::uintmax_t iters = 200;
    auto stop = [](double lo, double hi2) { return std::abs(hi2 - lo) <= 1e-12 * std::max(1.0, hi2); };
    const auto [lo, up] = boost::math::tools::toms748_solve(residual, 0.0, hi, stop, iters);
    return 0.5 * (lo + up);
}

/// Photocurrent and saturation current reproducing isc/voc exactly at STC irradiance and
/// temperature t, with the temperature-shifted short-circuit and open-circuit values.
inline std::pair<double, double> reference_currents(const PanelParams& p, double a, double t) {
    const double dt = t - kStcTemperature;
    const double isc = p.isc_stc + p.alpha_isc * dt;
    const double voc = p.voc_stc + p.beta_voc * dt;
    if (isc <= 0.0 || voc <= 0.0)
        throw ParameterError("panel: temperature coefficients drive isc or voc non-positive");
    const double g = std::isinf(p.r_shunt) ? 0.0 : 1.0 / p.r_shunt;
    const double e_oc = std::expm1(voc / a);
    const double e_sc = std::expm1(isc * p.r_series / a);
    // Iph follows linearly from I(0) = isc once I0 is expressed through I(voc) = 0.
    const double iph = (isc * (1.0 + p.r_series * g) - voc * g * e_sc / e_oc) / (1.0 - e_sc / e_oc);
    const double i0 = (iph - voc * g) / e_oc;
    if (!(iph > 0.0) || !(i0 > 0.0))
        throw ParameterError("panel: parameters give non-physical diode currents");
    return {iph, i0};
}

}  // namespace detail

/// Model coefficients for a given atmosphere; open-circuit voltage solved once here.
inline PanelConditions panel_conditions(const AtmosphereSample& atmos, const PanelParams& p) {
    validate(atmos);
    validate(p);
    PanelConditions c;
    c.a = p.ideality * p.cells_in_series * thermal_voltage(atmos.temperature);
    c.rs = p.r_series;
    c.g_shunt = std::isinf(p.r_shunt) ? 0.0 : 1.0 / p.r_shunt;
    c.panels = p.panels_in_series;
    const auto [iph_ref, i0] = detail::reference_currents(p, c.a, atmos.temperature);
    c.iph = iph_ref * atmos.irradiance / kStcIrradiance;
    c.i0 = i0;
    c.voc_panel = detail::panel_open_circuit(c);
    return c;
}

/// String current at string voltage v.
inline double pv_current(double v, const PanelConditions& c) {
    if (!std::isfinite(v))
        throw ParameterError("pv_current: voltage must be finite");
    if (v <= 0.0)
        return detail::panel_current(c, 0.0);
    if (v >= c.voc_string())
        return 0.0;
    return detail::panel_current(c, v / c.panels);
}

inline double pv_current(double v, const AtmosphereSample& atmos, const PanelParams& p) {
    return pv_current(v, panel_conditions(atmos, p));
}

inline double open_circuit_voltage(const AtmosphereSample& atmos, const PanelParams& p) {
    return panel_conditions(atmos, p).voc_string();
}

struct MppResult {
    double v_mp = 0.0;
    double i_mp = 0.0;
    double p_mp = 0.0;
};

/// Exhaustive sweep over [0, Voc]; `points` intervals (step Voc/points).
inline MppResult mpp_oracle(const PanelConditions& c, int points = 10000) {
    MppResult best;
    const double voc = c.voc_string();
    if (voc <= 0.0)
        return best;
    for (int k = 0; k <= points; ++k) {
        const double v = voc * k / points;
        const double i = pv_current(v, c);
        if (v * i > best.p_mp)
            best = {v, i, v * i};
    }
    return best;
}

inline MppResult mpp_oracle(const AtmosphereSample& atmos, const PanelParams& p, int points = 10000) {
    return mpp_oracle(panel_conditions(atmos, p), points);
}

/// Sampled I-V / P-V characteristic on a uniform grid over [0, Voc].
struct IvPoint {
    double v;
    double i;
    double p;
};

inline std::vector<IvPoint> iv_curve(const PanelConditions& c, int intervals) {
    std::vector<IvPoint> out;
    out.reserve(static_cast<std::size_t>(intervals) + 1);
    const double voc = c.voc_string();
    for (int k = 0; k <= intervals; ++k) {
        const double v = voc * k / intervals;
        const double i = pv_current(v, c);
        out.push_back({v, i, v * i});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationOptions {
    double preferred_ideality = 1.3;
    double ideality_step = 0.01;
};

namespace detail {

inline PanelParams params_from(const PanelDatasheet& d, double n, double rs, double g) {
    PanelParams p;
    p.isc_stc = d.isc;
    p.voc_stc = d.voc;
    p.vmp_stc = d.vmp;
    p.imp_stc = d.imp;
    p.alpha_isc = d.alpha_isc;
    p.beta_voc = d.beta_voc;
    p.ideality = n;
    p.r_series = rs;
    p.r_shunt = g > 0.0 ? 1.0 / g : std::numeric_limits<double>::infinity();
    p.cells_in_series = d.cells_in_series;
    p.panels_in_series = 1;
    return p;
}

/// Panel coefficients at STC; failure shows up as iph <= 0 or i0 <= 0.
inline PanelConditions stc_conditions(const PanelDatasheet& d, double n, double rs, double g) {
    PanelConditions c;
    c.a = n * d.cells_in_series * thermal_voltage(kStcTemperature);
    c.rs = rs;
    c.g_shunt = g;
    c.panels = 1;
    const double e_oc = std::expm1(d.voc / c.a);
    const double e_sc = std::expm1(d.isc * rs / c.a);
    c.iph = (d.isc * (1.0 + rs * g) - d.voc * g * e_sc / e_oc) / (1.0 - e_sc / e_oc);
    c.i0 = (c.iph - d.voc * g) / e_oc;
    c.voc_panel = d.voc;
    return c;
}

inline double mpp_current_residual(const PanelDatasheet& d, double n, double rs, double g) {
    const PanelConditions c = stc_conditions(d, n, rs, g);
    if (!(c.iph > 0.0) || !(c.i0 > 0.0))
        return -d.imp;
    return panel_current(c, d.vmp, 1e-13) - d.imp;
}

inline double mpp_power_slope(const PanelDatasheet& d, double n, double rs, double g) {
    const PanelConditions c = stc_conditions(d, n, rs, g);
    const double i = panel_current(c, d.vmp, 1e-13);
    return i + d.vmp * panel_slope(c, d.vmp, i);
}

template <class F>
double bracket_root(F f, double lo, double hi) {
    std::uintmax_t iters = 300;
    auto stop = [](double a, double b) { return std::abs(b - a) <= 1e-14 * std::max(1.0, std::abs(b)); };
    const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, stop, iters);
    return 0.5 * (a + b);
}

/// Shunt conductance putting (vmp, imp) on the curve for a given series resistance.
inline double shunt_for_series(const PanelDatasheet& d, double n, double rs) {
    auto f = [&](double g) { return mpp_current_residual(d, n, rs, g); };
    if (f(0.0) <= 0.0)
        return 0.0;
    double hi = d.imp / d.vmp;
    for (int k = 0; k < 80 && f(hi) > 0.0; ++k)
        hi *= 2.0;
    return bracket_root(f, 0.0, hi);
}

struct IdealityFit {
    bool ok = false;
    double rs = 0.0;
    double g = 0.0;
};

inline IdealityFit fit_for_ideality(const PanelDatasheet& d, double n) {
    IdealityFit fit;
    // Largest series resistance that still reaches (vmp, imp) with no shunt loss.
    auto no_shunt = [&](double rs) { return mpp_current_residual(d, n, rs, 0.0); };
    if (no_shunt(0.0) <= 0.0)
        return fit;
    const double rs_cap = (d.voc - d.vmp) / d.imp;
    if (no_shunt(rs_cap) > 0.0)
        return fit;
    const double rs_max = bracket_root(no_shunt, 0.0, rs_cap);
    auto slope = [&](double rs) { return mpp_power_slope(d, n, rs, shunt_for_series(d, n, rs)); };
    const double s_lo = slope(0.0);
    const double s_hi = slope(rs_max);
    if (!(s_lo > 0.0 && s_hi < 0.0))
        return fit;
    fit.rs = bracket_root(slope, 0.0, rs_max);
    fit.g = shunt_for_series(d, n, fit.rs);
    fit.ok = std::isfinite(fit.rs) && std::isfinite(fit.g);
    return fit;
}

}  // namespace detail

/// Residuals of a parameter set against its own datasheet points (relative).
struct CalibrationResiduals {
    double isc = 0.0;
    double voc = 0.0;
    double imp = 0.0;  ///< current at vmp vs imp
    double vmp = 0.0;  ///< model MPP voltage vs vmp
};

inline CalibrationResiduals calibration_residuals(const PanelParams& p) {
    PanelParams one = p;
    one.panels_in_series = 1;
    const PanelConditions c = panel_conditions({}, one);
    CalibrationResiduals r;
    r.isc = pv_current(0.0, c) / p.isc_stc - 1.0;
    r.voc = c.voc_panel / p.voc_stc - 1.0;
    r.imp = pv_current(p.vmp_stc, c) / p.imp_stc - 1.0;
    r.vmp = mpp_oracle(c).v_mp / p.vmp_stc - 1.0;
    return r;
}

/// Fit ideality, series and shunt resistance so the model passes through the
/// short-circuit, open-circuit and maximum-power datasheet points with zero power
/// slope at the maximum-power point. The preferred ideality is tried first, then
/// the [1, 2] grid outward from it.
inline PanelParams calibrate_panel(const PanelDatasheet& d, const CalibrationOptions& opt = {}) {
    try {
        validate_datasheet(d);
    } catch (const ParameterError& e) {
        throw CalibrationError(std::string("calibrate_panel: ") + e.what());
    }
    std::vector<double> candidates{opt.preferred_ideality};
    const int steps = static_cast<int>(std::lround(1.0 / opt.ideality_step));
    std::vector<double> grid;
    for (int k = 0; k <= steps; ++k)
        grid.push_back(1.0 + k * opt.ideality_step);
    std::stable_sort(grid.begin(), grid.end(), [&](double x, double y) {
        return std::abs(x - opt.preferred_ideality) < std::abs(y - opt.preferred_ideality);
    });
    candidates.insert(candidates.end(), grid.begin(), grid.end());

    for (double n : candidates) {
        if (n < 1.0 || n > 2.0)
            continue;
        const auto fit = detail::fit_for_ideality(d, n);
        if (!fit.ok)
            continue;
        PanelParams p = detail::params_from(d, n, fit.rs, fit.g);
        p.panels_in_series = d.panels_in_series;
        const auto r = calibration_residuals(p);
        if (std::abs(r.isc) <= 0.005 && std::abs(r.voc) <= 0.005 && std::abs(r.imp) <= 0.01 &&
            std::abs(r.vmp) <= 0.01)
            return p;
    }
    std::ostringstream msg;
    msg << "calibrate_panel: no ideality in [1, 2] reproduces the datasheet points (isc=" << d.isc
        << ", voc=" << d.voc << ", vmp=" << d.vmp << ", imp=" << d.imp << ")";
    const auto fallback = detail::fit_for_ideality(d, opt.preferred_ideality);
    if (fallback.ok) {
        const auto r = calibration_residuals(detail::params_from(d, opt.preferred_ideality, fallback.rs, fallback.g));
        msg << "; residuals at n=" << opt.preferred_ideality << ": isc " << r.isc << ", voc " << r.voc
            << ", imp " << r.imp << ", vmp " << r.vmp;
    }
    throw CalibrationError(msg.str());
}

inline PanelDatasheet datasheet_of(const PanelParams& p) {
    return {p.isc_stc, p.voc_stc, p.vmp_stc, p.imp_stc, p.alpha_isc, p.beta_voc, p.cells_in_series,
            p.panels_in_series};
}

}  // namespace mippv
