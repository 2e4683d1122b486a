#pragma once

// Command-line front end: run, mpp, table, sweep.
//
// Exit status: 0 success, 1 scenario/model failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mippv/converter.hpp"
#include "mippv/engine.hpp"
#include "mippv/errors.hpp"
#include "mippv/pv_model.hpp"
#include "mippv/report.hpp"
#include "mippv/scenario_io.hpp"
#include "mippv/waveform_io.hpp"

namespace mippv {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Bad argument value detected after option parsing.
class UsageError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline std::filesystem::path output_dir(const std::string& flag) {
    if (!flag.empty())
        return flag;
    if (const char* env = std::getenv("MIPPV_OUT_DIR"); env && *env)
        return env;
    return ".";
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << text;
    if (!out)
        throw IoError("write failed: " + path.string());
}

inline ModelKind parse_model(const std::string& s) {
    if (s == "averaged")
        return ModelKind::Averaged;
    if (s == "switched")
        return ModelKind::Switched;
    throw UsageError("--model: expected averaged or switched");
}

inline int cmd_run(const std::string& file, const std::string& out_flag, const std::string& model, std::ostream& out) {
    Scenario sc = load_scenario(file);
    if (!model.empty()) {
        sc.model = parse_model(model);
        validate(sc);
    }
    if (sc.name.empty())
        sc.name = std::filesystem::path(file).stem().string();
    RunOptions opt;
    opt.base_dir = std::filesystem::path(file).parent_path();
    const RunResult r = run_scenario(sc, opt);

    const auto dir = output_dir(out_flag);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_waveforms(r.record, dir / "waveforms.csv");
    write_text(dir / "summary.json", summary_to_json(r.summary).dump(2) + "\n");
    const std::string text = summary_to_text(r.summary);
    write_text(dir / "summary.txt", text);
    out << text << "\nwrote " << (dir / "waveforms.csv").string() << ", summary.json, summary.txt\n";
    return kExitOk;
}

inline int cmd_mpp(const std::string& file, double ir, double temp, int points, std::ostream& out) {
    const PanelDatasheet ds = parse_panel_config(read_text(file));
    const PanelParams p = calibrate_panel(ds);
    const AtmosphereSample a{ir, temp};
    validate(a);
    const PanelConditions cond = panel_conditions(a, p);
    out << "panel: n=" << p.ideality << " rs=" << p.r_series << " ohm rsh=" << p.r_shunt << " ohm, "
        << p.panels_in_series << " x " << p.cells_in_series << " cells\n";
    out << "v,i,p\n";
    for (const auto& pt : iv_curve(cond, points))
        out << format_double(pt.v) << ',' << format_double(pt.i) << ','
            << format_double(pt.p) << '\n';
    const MppResult m = mpp_oracle(cond);
    out << "mpp: v=" << detail::fixed(m.v_mp, 3) << " V i=" << detail::fixed(m.i_mp, 4)
        << " A p=" << detail::fixed(m.p_mp, 2) << " W (voc=" << detail::fixed(cond.voc_string(), 3) << " V)\n";
    return kExitOk;
}

inline int cmd_table(const std::string& token, std::ostream& out) {
    const auto s = parse_structure(token, kChannels);
    if (!s)
        throw UsageError("unknown structure `" + token + "` (expected parallel, cascade, pv1 or pv2)");
    out << to_string(switch_table(*s)) << '\n';
    return kExitOk;
}

/// Sets a numeric key given as a dotted path (`circuit.r_load`, `atmosphere.0.irradiance`).
inline Scenario with_param(const Scenario& base, const std::string& key, double value) {
    nlohmann::json doc = scenario_to_json(base);
    std::string pointer = "/" + key;
    for (char& c : pointer)
        if (c == '.')
            c = '/';
    const nlohmann::json::json_pointer ptr(pointer);
    if (!doc.contains(ptr) || !doc.at(ptr).is_number())
        throw UsageError("--param: `" + key + "` is not a numeric scenario key");
    doc[ptr] = value;
    Scenario sc = parse_scenario(doc.dump());
    sc.name = base.name + "[" + key + "=" + format_double(value) + "]";
    return sc;
}

inline int cmd_sweep(const std::string& file, const std::string& key, const std::vector<double>& values,
                     const std::string& out_flag, std::ostream& out) {
    const Scenario base = load_scenario(file);
    std::vector<Scenario> variants;
    for (double v : values)
        variants.push_back(with_param(base, key, v));
    RunOptions opt;
    opt.base_dir = std::filesystem::path(file).parent_path();

    std::vector<std::future<Summary>> jobs;
    for (const auto& sc : variants)
        jobs.push_back(std::async(std::launch::async, [sc, opt] { return run_scenario(sc, opt).summary; }));

    std::ostringstream table;
    table << key << ",v_o,p_o,delivered_energy,mppt_eff1,mppt_eff2\n";
    int status = kExitOk;
    nlohmann::json all = nlohmann::json::array();
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        try {
            const Summary s = jobs[k].get();
            const PhaseSummary* last = s.phases.empty() ? nullptr : &s.phases.back();
            auto eff = [&](std::size_t c) {
                return c < s.mppt_efficiency.size() && s.mppt_efficiency[c]
                           ? format_double(*s.mppt_efficiency[c])
                           : std::string();
            };
            table << format_double(values[k]) << ',' << (last ? format_double(last->v_o) : "") << ','
                  << (last ? format_double(last->p_o) : "") << ',' << format_double(s.delivered_energy)
                  << ',' << eff(0) << ',' << eff(1) << '\n';
            nlohmann::json j = summary_to_json(s);
            j["value"] = values[k];
            all.push_back(j);
        } catch (const Error& e) {
            table << format_double(values[k]) << ",error: " << e.what() << '\n';
            status = kExitFailure;
        }
    }
    out << table.str();
    if (!out_flag.empty() || std::getenv("MIPPV_OUT_DIR")) {
        const auto dir = output_dir(out_flag);
        std::filesystem::create_directories(dir);
        write_text(dir / "sweep.csv", table.str());
        write_text(dir / "sweep.json", all.dump(2) + "\n");
    }
    return status;
}

}  // namespace detail

/// Parses `args` (without the program name) and runs the subcommand.
inline int cli_dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
    CLI::App app{"Multi-input PV converter simulator", "mippv"};
    app.require_subcommand(1);

    std::string file, out_dir, model, structure, key;
    double ir = 0.0, temp = 25.0;
    int points = 50;
    std::vector<double> values;

    auto* run = app.add_subcommand("run", "simulate a scenario; writes waveforms.csv and summary.{json,txt}");
    run->add_option("scenario", file, "scenario file")->required();
    run->add_option("--out", out_dir, "output directory (default $MIPPV_OUT_DIR, else .)");
    run->add_option("--model", model, "averaged|switched")->check(CLI::IsMember({"averaged", "switched"}));

    auto* mpp = app.add_subcommand("mpp", "print the I-V/P-V sweep and maximum power point");
    mpp->add_option("panel", file, "panel config (datasheet object or scenario)")->required();
    mpp->add_option("--ir", ir, "irradiance, W/m^2")->required();
    mpp->add_option("--temp", temp, "cell temperature, degC")->required();
    mpp->add_option("--points", points, "sweep intervals")->check(CLI::Range(1, 100000));

    auto* table = app.add_subcommand("table", "print the switch states of a structure");
    table->add_option("structure", structure, "parallel|cascade|pv1|pv2")->required();

    auto* sweep = app.add_subcommand("sweep", "run scenario variants over one numeric key");
    sweep->add_option("scenario", file, "scenario file")->required();
    sweep->add_option("--param", key, "dotted key, e.g. circuit.r_load")->required();
    sweep->add_option("--values", values, "values to substitute")->required();
    sweep->add_option("--out", out_dir, "output directory for sweep.csv/sweep.json");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*run)
            return detail::cmd_run(file, out_dir, model, out);
        if (*mpp)
            return detail::cmd_mpp(file, ir, temp, points, out);
        if (*table)
            return detail::cmd_table(structure, out);
        return detail::cmd_sweep(file, key, values, out_dir, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const BlowUpError& e) {
        err << "error: " << e.what() << " (t = " << e.time() << " s)\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace mippv
