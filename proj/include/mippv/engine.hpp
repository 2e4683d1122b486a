#pragma once

// Fixed-step time-domain simulation of a scenario.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mippv/control.hpp"
#include "mippv/converter.hpp"
#include "mippv/integrator.hpp"
#include "mippv/mission_profile.hpp"
#include "mippv/pv_model.hpp"
#include "mippv/scenario.hpp"

namespace mippv {

/// Row k > 0 holds electrical quantities averaged over ((k-1)T, kT] and the mode and
/// duties in effect at kT; row 0 is the initial state.
struct WaveformRecord {
    std::vector<double> t;
    std::vector<double> v_pv1, v_pv2;
    std::vector<double> i_pv1, i_pv2;
    std::vector<double> i_l;
    std::vector<double> v_o;
    std::vector<double> i_o;
    std::vector<double> p_pv1, p_pv2;
    std::vector<std::string> mode;
    std::vector<double> d1, d2, dm;

    std::size_t size() const { return t.size(); }
    bool operator==(const WaveformRecord&) const = default;
};

struct PhaseSummary {
    double t_start = 0.0;
    double t_end = 0.0;
    double window_start = 0.0;
    std::string mode;  ///< mode at the end of the phase
    double v_o = 0.0;
    double i_o = 0.0;
    double i_l = 0.0;
    double p_o = 0.0;
    std::vector<double> v_pv;
    std::vector<double> i_pv;
    std::vector<double> p_pv;
    std::vector<std::optional<double>> p_mpp;  ///< mean oracle MPP power over the window
};

struct ModeChange {
    double t = 0.0;
    std::string mode;
};

struct ReferenceComparison {
    std::size_t phase = 1;
    std::string quantity;
    double reported = 0.0;
    double simulated = 0.0;
    bool agrees = false;  ///< within 2 %
    std::string note;
};

struct Summary {
    std::string scenario;
    double duration = 0.0;
    std::vector<PhaseSummary> phases;
    double source_energy = 0.0;   ///< J
    double delivered_energy = 0.0;  ///< J into the load
    double stored_energy_delta = 0.0;  ///< J
    std::vector<std::optional<double>> mppt_efficiency;
    std::vector<ModeChange> timeline;
    std::vector<ReferenceComparison> reference;
};

/// Snapshot passed to the observer after every control update.
struct ControlTrace {
    double t = 0.0;
    const ConverterState* state = nullptr;
    const DutyCommand* command = nullptr;
    const OperatingMode* mode = nullptr;  ///< null under fixed duties
    const std::vector<double>* v_ref = nullptr;
};

struct RunOptions {
    std::function<void(const ControlTrace&)> on_control;
    /// Directory that relative mission-profile paths resolve against.
    std::filesystem::path base_dir;
};

struct RunResult {
    WaveformRecord record;
    Summary summary;
};

/// PV strings: capacitor current source I(v) per channel.
struct PvStringSources {
    std::vector<PanelConditions> conditions;

    std::vector<double> operator()(const ConverterState& x, const std::vector<double>&) const {
        std::vector<double> i(conditions.size());
        for (std::size_t k = 0; k < conditions.size(); ++k)
            i[k] = pv_current(x.v_cpv[k], conditions[k]);
        return i;
    }
};

namespace detail {

struct ChannelLoop {
    PnoState pno;
    PiState pi_v;
    PiState pi_c;
    bool active = false;
};

struct PhaseAccumulator {
    double t_start = 0.0;
    double t_end = 0.0;
    double window_start = 0.0;
    double weight = 0.0;
    double v_o = 0.0, i_o = 0.0, i_l = 0.0, p_o = 0.0;
    std::vector<double> v_pv, i_pv, p_pv;
    std::string mode;
};

/// Caches oracle results per atmosphere sample.
class OracleCache {
public:
    explicit OracleCache(PanelParams p) : params_(std::move(p)) {}

    double p_mp(const AtmosphereSample& a) {
        const auto key = std::make_pair(a.irradiance, a.temperature);
        if (auto it = cache_.find(key); it != cache_.end())
            return it->second;
        const double p = mpp_oracle(a, params_).p_mp;
        cache_.emplace(key, p);
        return p;
    }

private:
    PanelParams params_;
    std::map<std::pair<double, double>, double> cache_;
};

}  // namespace detail

class Simulation {
public:
    Simulation(Scenario sc, RunOptions opt = {}) : sc_(std::move(sc)), opt_(std::move(opt)) {
        validate(sc_);
        if (sc_.sources == SourceKind::PvString)
            params_ = calibrate_panel(sc_.panel);
        if (sc_.mission_profile) {
            std::filesystem::path path = sc_.mission_profile->path;
            if (path.is_relative() && !opt_.base_dir.empty())
                path = opt_.base_dir / path;
            profile_.emplace(load_mission_profile(path.string()));
            if (profile_->channels() != kChannels)
                throw FormatError("mission profile: expected 2 channels");
        }
    }

    const PanelParams& panel() const { return params_; }

    RunResult run();

private:
    std::vector<AtmosphereSample> atmosphere_at(double t) const {
        if (profile_)
            return profile_->at(t * sc_.mission_profile->time_scale);
        return atmos_;
    }

    void refresh_conditions(const std::vector<AtmosphereSample>& a) {
        if (sc_.sources != SourceKind::PvString)
            return;
        if (!cond_.conditions.empty() && a == cond_atmos_)
            return;
        cond_.conditions.clear();
        for (const auto& s : a)
            cond_.conditions.push_back(panel_conditions(s, params_));
        cond_atmos_ = a;
    }

    std::vector<double> source_currents(const ConverterState& x, const std::vector<double>& draw) const {
        if (sc_.sources == SourceKind::Ideal)
            return draw;
        return cond_(x, draw);
    }

    void control_update(long long step, double t);
    void apply_event(const Event& e);

    Scenario sc_;
    RunOptions opt_;
    PanelParams params_;
    std::optional<MissionProfile> profile_;

    std::vector<AtmosphereSample> atmos_;
    std::vector<AtmosphereSample> cond_atmos_;
    PvStringSources cond_;
    ConverterState x_;
    DutyCommand cmd_;
    OperatingMode mode_;
    bool have_mode_ = false;
    std::vector<detail::ChannelLoop> loops_;
    std::vector<double> v_ref_;
    long long pno_every_ = 1;
    long long control_every_ = 1;
    double pno_step_ = 1.0;
    std::vector<ModeChange> timeline_;
};

inline void Simulation::apply_event(const Event& e) {
    if (e.structure)
        cmd_.structure = *e.structure;
    if (e.duties)
        cmd_.d = *e.duties;
    if (e.slots)
        cmd_.slots = *e.slots;
    if (e.channel && (e.irradiance || e.temperature)) {
        if (e.irradiance)
            atmos_[*e.channel].irradiance = *e.irradiance;
        if (e.temperature)
            atmos_[*e.channel].temperature = *e.temperature;
    }
    if (e.structure || e.duties || e.slots)
        validate(cmd_, kChannels);
}

inline void Simulation::control_update(long long step, double t) {
    const auto& c = sc_.control;
    const double dt_c = sc_.control_step();
    if (c.kind == ControlKind::Fixed) {
        const std::string token = to_token(cmd_.structure);
        if (timeline_.empty() || timeline_.back().mode != token)
            timeline_.push_back({t, token});
        if (opt_.on_control)
            opt_.on_control({t, &x_, &cmd_, nullptr, &v_ref_});
        return;
    }

    const auto atmos = atmosphere_at(t);
    const OperatingMode mode = select_mode(atmos, c.thresholds);
    if (!have_mode_ || !(mode == mode_)) {
        mode_ = mode;
        have_mode_ = true;
        timeline_.push_back({t, mode_token(mode_)});
    }

    // Channels whose own loop drives a duty in this mode.
    std::vector<bool> tracking(kChannels, false);
    if (mode_.regime == Regime::ParallelFullMppt)
        std::fill(tracking.begin(), tracking.end(), true);
    else
        tracking[mode_.leader] = true;

    const auto sigma = draw_factors(cmd_);
    const double i_l = std::max(x_.i_l, 0.0);
    const bool pno_tick = step % pno_every_ == 0;
    std::vector<double> duty = cmd_.d;
    for (std::size_t k = 0; k < kChannels; ++k) {
        auto& loop = loops_[k];
        if (!tracking[k]) {
            loop.active = false;
            continue;
        }
        const double v = x_.v_cpv[k];
        const double voc = cond_.conditions[k].voc_string();
        const double p = v * pv_current(v, cond_.conditions[k]);
        const double i_draw = sigma[k] * i_l;
        if (!loop.active) {
            // Bumpless (re)start from the present operating point.
            loop.pno.step = pno_step_;
            loop.pno.v_ref = step == 0 ? c.pno.v_init_frac * voc : std::clamp(v, 0.0, voc);
            loop.pno.last_power = p;
            loop.pno.last_voltage = v;
            loop.pno.direction = -1;
            loop.pi_v.integrator = std::clamp(i_draw, loop.pi_v.out_min, loop.pi_v.out_max);
            loop.pi_c.integrator = std::clamp(cmd_.d[k], loop.pi_c.out_min, loop.pi_c.out_max);
            loop.active = true;
        } else if (pno_tick) {
            loop.pno = perturb_observe(loop.pno, v, p, voc);
        }
        const auto r = dual_loop_step(loop.pi_v, loop.pi_c, loop.pno.v_ref, v, i_draw, dt_c);
        loop.pi_v = r.voltage;
        loop.pi_c = r.current;
        duty[k] = r.duty;
        v_ref_[k] = loop.pno.v_ref;
    }
    cmd_ = assign_duties(mode_, duty[mode_.leader], duty, c.d_m);
    if (opt_.on_control)
        opt_.on_control({t, &x_, &cmd_, &mode_, &v_ref_});
}

inline RunResult Simulation::run() {
    const double dt = sc_.sim_step();
    const long long steps = std::llround(sc_.duration / dt);
    control_every_ = detail::step_ratio(sc_.control_step(), dt, "dt_control");
    const long long record_every = detail::step_ratio(sc_.record_interval, dt, "record_interval");
    if (sc_.control.kind == ControlKind::Mppt)
        pno_every_ = detail::step_ratio(sc_.control.pno.period, sc_.control_step(), "control.pno.period");

    atmos_ = sc_.atmosphere;
    refresh_conditions(atmosphere_at(0.0));

    x_ = ConverterState{};
    x_.v_cpv.resize(kChannels);
    for (std::size_t k = 0; k < kChannels; ++k)
        x_.v_cpv[k] = sc_.sources == SourceKind::Ideal ? sc_.source_voltages[k] : cond_.conditions[k].voc_string();
    const double e_store0 = stored_energy(x_, sc_.circuit);

    cmd_ = DutyCommand{sc_.control.duties, sc_.control.d_m, sc_.control.structure, sc_.control.slots};
    if (sc_.control.kind == ControlKind::Mppt) {
        cmd_.d.assign(kChannels, 0.0);
        cmd_.structure = ConnectionStructure::parallel();
        const PanelConditions stc = panel_conditions({}, params_);
        pno_step_ = sc_.control.pno.step ? *sc_.control.pno.step : 0.005 * stc.voc_string();
    }
    loops_.assign(kChannels, detail::ChannelLoop{{}, sc_.control.pi_voltage.state(), sc_.control.pi_current.state()});
    v_ref_.assign(kChannels, 0.0);
    have_mode_ = false;
    timeline_.clear();

    // Phase boundaries at distinct event times.
    std::vector<double> bounds{0.0};
    for (const auto& e : sc_.events)
        if (e.t > bounds.back() && e.t < sc_.duration)
            bounds.push_back(e.t);
    bounds.push_back(sc_.duration);
    std::vector<detail::PhaseAccumulator> phases;
    if (steps > 0) {
        for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
            detail::PhaseAccumulator acc;
            acc.t_start = bounds[k];
            acc.t_end = bounds[k + 1];
            acc.window_start = acc.t_end - sc_.window_fraction * (acc.t_end - acc.t_start);
            acc.v_pv.assign(kChannels, 0.0);
            acc.i_pv.assign(kChannels, 0.0);
            acc.p_pv.assign(kChannels, 0.0);
            phases.push_back(std::move(acc));
        }
    }

    WaveformRecord rec;
    auto push_row = [&](double t, const std::vector<double>& v, const std::vector<double>& i, double il, double vo,
                        const std::vector<double>& p) {
        rec.t.push_back(t);
        rec.v_pv1.push_back(v[0]);
        rec.v_pv2.push_back(v[1]);
        rec.i_pv1.push_back(i[0]);
        rec.i_pv2.push_back(i[1]);
        rec.i_l.push_back(il);
        rec.v_o.push_back(vo);
        rec.i_o.push_back(vo / sc_.circuit.r_load);
        rec.p_pv1.push_back(p[0]);
        rec.p_pv2.push_back(p[1]);
        rec.mode.push_back(timeline_.empty() ? to_token(cmd_.structure) : timeline_.back().mode);
        rec.d1.push_back(cmd_.d[0]);
        rec.d2.push_back(cmd_.d[1]);
        rec.dm.push_back(cmd_.d_m);
    };

    auto currents_now = [&](const ConverterState& x) {
        const auto sigma = draw_factors(cmd_);
        std::vector<double> draw(kChannels);
        for (std::size_t k = 0; k < kChannels; ++k)
            draw[k] = sigma[k] * std::max(x.i_l, 0.0);
        return source_currents(x, draw);
    };

    std::size_t next_event = 0;
    double e_source = 0.0;
    double e_load = 0.0;
    std::vector<double> sum_v(kChannels), sum_i(kChannels), sum_p(kChannels);
    double sum_il = 0.0, sum_vo = 0.0;
    long long in_interval = 0;
    std::size_t phase = 0;

    for (long long n = 0; n < steps; ++n) {
        const double t = static_cast<double>(n) * dt;
        while (next_event < sc_.events.size() && std::llround(sc_.events[next_event].t / dt) <= n)
            apply_event(sc_.events[next_event++]);
        refresh_conditions(atmosphere_at(t));
        if (n % control_every_ == 0)
            control_update(n, t);
        if (n == 0) {
            const auto i0 = currents_now(x_);
            std::vector<double> p0(kChannels);
            for (std::size_t k = 0; k < kChannels; ++k)
                p0[k] = x_.v_cpv[k] * i0[k];
            push_row(0.0, x_.v_cpv, i0, x_.i_l, x_.v_co, p0);
        }

        auto source = [this](const ConverterState& x, const std::vector<double>& draw) {
            return source_currents(x, draw);
        };
        const StepResult r = sc_.model == ModelKind::Averaged ? step_averaged(x_, cmd_, sc_.circuit, source, t, dt)
                                                              : step_switched(x_, cmd_, sc_.circuit, source, t, dt);
        x_ = r.state;
        e_source += r.source_energy;
        e_load += r.load_energy;

        // Sample quantities at the end of the step with the currents over the step.
        const double t1 = static_cast<double>(n + 1) * dt;
        const double step_dt = dt;
        std::vector<double> i_pv(kChannels);
        if (sc_.sources == SourceKind::Ideal) {
            // Average of the draw across the step, as seen by the switched or averaged model.
            i_pv = currents_now(x_);
            if (sc_.model == ModelKind::Switched) {
                const SwitchStates g = switched_gates(t + 0.5 * dt, cmd_, sc_.circuit);
                i_pv[0] = g.s1 ? x_.i_l : 0.0;
                i_pv[1] = g.s2 ? x_.i_l : 0.0;
            }
        } else {
            i_pv = cond_(x_, {});
        }
        for (std::size_t k = 0; k < kChannels; ++k) {
            sum_v[k] += x_.v_cpv[k];
            sum_i[k] += i_pv[k];
            sum_p[k] += x_.v_cpv[k] * i_pv[k];
        }
        sum_il += x_.i_l;
        sum_vo += x_.v_co;
        ++in_interval;

        while (phase < phases.size() && t1 > phases[phase].t_end + 0.5 * dt)
            ++phase;
        if (phase < phases.size()) {
            auto& acc = phases[phase];
            if (t1 > acc.window_start + 0.5 * dt) {
                acc.weight += step_dt;
                acc.v_o += x_.v_co * step_dt;
                acc.i_o += x_.v_co / sc_.circuit.r_load * step_dt;
                acc.i_l += x_.i_l * step_dt;
                acc.p_o += x_.v_co * x_.v_co / sc_.circuit.r_load * step_dt;
                for (std::size_t k = 0; k < kChannels; ++k) {
                    acc.v_pv[k] += x_.v_cpv[k] * step_dt;
                    acc.i_pv[k] += i_pv[k] * step_dt;
                    acc.p_pv[k] += x_.v_cpv[k] * i_pv[k] * step_dt;
                }
            }
            acc.mode = timeline_.empty() ? to_token(cmd_.structure) : timeline_.back().mode;
        }

        if ((n + 1) % record_every == 0) {
            const double inv = 1.0 / static_cast<double>(in_interval);
            std::vector<double> v(kChannels), i(kChannels), p(kChannels);
            for (std::size_t k = 0; k < kChannels; ++k) {
                v[k] = sum_v[k] * inv;
                i[k] = sum_i[k] * inv;
                p[k] = sum_p[k] * inv;
            }
            push_row(t1, v, i, sum_il * inv, sum_vo * inv, p);
            std::fill(sum_v.begin(), sum_v.end(), 0.0);
            std::fill(sum_i.begin(), sum_i.end(), 0.0);
            std::fill(sum_p.begin(), sum_p.end(), 0.0);
            sum_il = sum_vo = 0.0;
            in_interval = 0;
        }
    }

    RunResult out;
    out.record = std::move(rec);
    Summary& s = out.summary;
    s.scenario = sc_.name;
    s.duration = sc_.duration;
    s.source_energy = e_source;
    s.delivered_energy = e_load;
    s.stored_energy_delta = steps > 0 ? stored_energy(x_, sc_.circuit) - e_store0 : 0.0;
    s.timeline = timeline_;

    std::optional<detail::OracleCache> oracle;
    if (sc_.sources == SourceKind::PvString)
        oracle.emplace(params_);
    std::vector<double> tracked(kChannels, 0.0), available(kChannels, 0.0);

    // Atmosphere at time t, replaying scripted events.
    auto atmos_at_time = [&](double t) {
        if (profile_)
            return atmosphere_at(t);
        std::vector<AtmosphereSample> a = sc_.atmosphere;
        for (const auto& e : sc_.events) {
            if (std::llround(e.t / dt) > static_cast<long long>(std::floor(t / dt)))
                break;
            if (e.channel) {
                if (e.irradiance)
                    a[*e.channel].irradiance = *e.irradiance;
                if (e.temperature)
                    a[*e.channel].temperature = *e.temperature;
            }
        }
        return a;
    };

    for (auto& acc : phases) {
        PhaseSummary ps;
        ps.t_start = acc.t_start;
        ps.t_end = acc.t_end;
        ps.window_start = acc.window_start;
        ps.mode = acc.mode;
        const double w = acc.weight > 0.0 ? 1.0 / acc.weight : 0.0;
        ps.v_o = acc.v_o * w;
        ps.i_o = acc.i_o * w;
        ps.i_l = acc.i_l * w;
        ps.p_o = acc.p_o * w;
        ps.p_mpp.assign(kChannels, std::nullopt);
        for (std::size_t k = 0; k < kChannels; ++k) {
            ps.v_pv.push_back(acc.v_pv[k] * w);
            ps.i_pv.push_back(acc.i_pv[k] * w);
            ps.p_pv.push_back(acc.p_pv[k] * w);
        }
        if (oracle && acc.weight > 0.0) {
            // Oracle averaged over evenly spaced window samples (one for constant weather).
            const int samples = profile_ ? 16 : 1;
            std::vector<double> mean(kChannels, 0.0);
            for (int j = 0; j < samples; ++j) {
                const double tj = profile_ ? acc.window_start + (j + 0.5) * (acc.t_end - acc.window_start) / samples
                                           : acc.t_end - 0.5 * dt;
                const auto a = atmos_at_time(tj);
                for (std::size_t k = 0; k < kChannels; ++k)
                    mean[k] += oracle->p_mp(a[k]) / samples;
            }
            for (std::size_t k = 0; k < kChannels; ++k) {
                ps.p_mpp[k] = mean[k];
                tracked[k] += ps.p_pv[k] * acc.weight;
                available[k] += mean[k] * acc.weight;
            }
        }
        s.phases.push_back(std::move(ps));
    }
    for (std::size_t k = 0; k < kChannels; ++k) {
        if (oracle && available[k] > 0.0)
            s.mppt_efficiency.push_back(tracked[k] / available[k]);
        else if (oracle && steps > 0)
            s.mppt_efficiency.push_back(0.0);
        else
            s.mppt_efficiency.push_back(std::nullopt);
    }

    for (const auto& ref : sc_.reference) {
        ReferenceComparison cmp;
        cmp.phase = ref.phase;
        cmp.quantity = ref.quantity;
        cmp.reported = ref.reported;
        cmp.note = ref.note;
        if (ref.phase <= s.phases.size()) {
            const auto& ps = s.phases[ref.phase - 1];
            const std::map<std::string, double> q{
                {"v_o", ps.v_o},       {"i_o", ps.i_o},       {"i_l", ps.i_l},       {"p_o", ps.p_o},
                {"v_pv1", ps.v_pv[0]}, {"v_pv2", ps.v_pv[1]}, {"i_pv1", ps.i_pv[0]}, {"i_pv2", ps.i_pv[1]},
                {"p_pv1", ps.p_pv[0]}, {"p_pv2", ps.p_pv[1]}};
            if (auto it = q.find(ref.quantity); it != q.end()) {
                cmp.simulated = it->second;
                const double tol = 0.02 * std::max(std::abs(ref.reported), 1e-9);
                cmp.agrees = std::abs(cmp.simulated - ref.reported) <= tol ||
                             (ref.reported == 0.0 && std::abs(cmp.simulated) <= 0.02);
            }
        }
        s.reference.push_back(std::move(cmp));
    }
    return out;
}

inline RunResult run_scenario(const Scenario& sc, RunOptions opt = {}) {
    return Simulation(sc, std::move(opt)).run();
}

}  // namespace mippv
