#pragma once

// CSV waveform files.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mippv/engine.hpp"
#include "mippv/errors.hpp"

namespace mippv {

inline constexpr const char* kWaveformHeader = "t,v_pv1,v_pv2,i_pv1,i_pv2,i_l,v_o,i_o,p_pv1,p_pv2,mode,d1,d2,dm";

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw FormatError("waveform line " + std::to_string(line) + ": bad number `" + s + "`");
    return v;
}

}  // namespace detail

inline void check_record(const WaveformRecord& r) {
    const std::size_t n = r.t.size();
    for (std::size_t len : {r.v_pv1.size(), r.v_pv2.size(), r.i_pv1.size(), r.i_pv2.size(), r.i_l.size(),
                            r.v_o.size(), r.i_o.size(), r.p_pv1.size(), r.p_pv2.size(), r.mode.size(), r.d1.size(),
                            r.d2.size(), r.dm.size()})
        if (len != n)
            throw FormatError("waveform record: series lengths differ");
}

/// Shortest round-trip decimal representation for every value.
inline void write_waveforms(const WaveformRecord& r, std::ostream& out) {
    check_record(r);
    out << kWaveformHeader << '\n';
    using detail::format_double;
    for (std::size_t k = 0; k < r.size(); ++k) {
        out << format_double(r.t[k]) << ',' << format_double(r.v_pv1[k]) << ',' << format_double(r.v_pv2[k]) << ','
            << format_double(r.i_pv1[k]) << ',' << format_double(r.i_pv2[k]) << ',' << format_double(r.i_l[k])
            << ',' << format_double(r.v_o[k]) << ',' << format_double(r.i_o[k]) << ',' << format_double(r.p_pv1[k])
            << ',' << format_double(r.p_pv2[k]) << ',' << r.mode[k] << ',' << format_double(r.d1[k]) << ','
            << format_double(r.d2[k]) << ',' << format_double(r.dm[k]) << '\n';
    }
}

inline void write_waveforms(const WaveformRecord& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    write_waveforms(r, out);
    out.flush();
    if (!out)
        throw IoError("write failed: " + path.string());
}

inline WaveformRecord read_waveforms(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kWaveformHeader)
        throw FormatError("waveform header must be `" + std::string(kWaveformHeader) + "`");
    WaveformRecord r;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            f.push_back(cell);
        if (f.size() != 14)
            throw FormatError("waveform line " + std::to_string(line_no) + ": expected 14 fields");
        auto num = [&](std::size_t i) { return detail::parse_double(f[i], line_no); };
        r.t.push_back(num(0));
        r.v_pv1.push_back(num(1));
        r.v_pv2.push_back(num(2));
        r.i_pv1.push_back(num(3));
        r.i_pv2.push_back(num(4));
        r.i_l.push_back(num(5));
        r.v_o.push_back(num(6));
        r.i_o.push_back(num(7));
        r.p_pv1.push_back(num(8));
        r.p_pv2.push_back(num(9));
        r.mode.push_back(f[10]);
        r.d1.push_back(num(11));
        r.d2.push_back(num(12));
        r.dm.push_back(num(13));
    }
    return r;
}

inline WaveformRecord read_waveforms(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path.string());
    return read_waveforms(in);
}

}  // namespace mippv
