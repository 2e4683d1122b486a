#pragma once

// Per-channel irradiance/temperature time series with piecewise-linear interpolation.
// File format: delimited text, header `t,ir1,t1,ir2,t2`, SI units (s, W/m^2, degC).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mippv/errors.hpp"
#include "mippv/pv_model.hpp"

namespace mippv {

struct ProfileSample {
    double t = 0.0;
    std::vector<AtmosphereSample> channels;
};

class MissionProfile {
public:
    explicit MissionProfile(std::vector<ProfileSample> samples) : samples_(std::move(samples)) {
        if (samples_.empty())
            throw FormatError("mission profile: no samples");
        const std::size_t n = samples_.front().channels.size();
        for (std::size_t k = 0; k < samples_.size(); ++k) {
            if (!std::isfinite(samples_[k].t))
                throw FormatError("mission profile: non-finite timestamp");
            if (samples_[k].channels.size() != n)
                throw FormatError("mission profile: ragged channel count");
            if (k > 0 && !(samples_[k].t > samples_[k - 1].t))
                throw FormatError("mission profile: timestamps must be strictly increasing (row " +
                                  std::to_string(k + 1) + ")");
        }
    }

    std::size_t channels() const { return samples_.front().channels.size(); }
    const std::vector<ProfileSample>& samples() const { return samples_; }
    double start() const { return samples_.front().t; }
    double end() const { return samples_.back().t; }

    /// Clamped to the first/last sample outside the covered range.
    std::vector<AtmosphereSample> at(double t) const {
        if (t <= samples_.front().t)
            return samples_.front().channels;
        if (t >= samples_.back().t)
            return samples_.back().channels;
        const auto hi = std::upper_bound(samples_.begin(), samples_.end(), t,
                                         [](double x, const ProfileSample& s) { return x < s.t; });
        const auto lo = hi - 1;
        const double w = (t - lo->t) / (hi->t - lo->t);
        std::vector<AtmosphereSample> out(lo->channels.size());
        for (std::size_t k = 0; k < out.size(); ++k) {
            out[k].irradiance = lo->channels[k].irradiance + w * (hi->channels[k].irradiance - lo->channels[k].irradiance);
            out[k].temperature =
                lo->channels[k].temperature + w * (hi->channels[k].temperature - lo->channels[k].temperature);
        }
        return out;
    }

private:
    std::vector<ProfileSample> samples_;
};

inline MissionProfile load_mission_profile(std::vector<ProfileSample> samples) {
    return MissionProfile(std::move(samples));
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
    }
    return out;
}

}  // namespace detail

inline MissionProfile parse_mission_profile(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("mission profile: empty input");
    const auto header = detail::split_fields(line);
    if (header != std::vector<std::string>{"t", "ir1", "t1", "ir2", "t2"})
        throw FormatError("mission profile: header must be `t,ir1,t1,ir2,t2`");
    std::vector<ProfileSample> samples;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#')
            continue;
        const auto f = detail::split_fields(line);
        if (f.size() != 5)
            throw FormatError("mission profile: row " + std::to_string(row) + " needs 5 fields");
        double v[5];
        for (int k = 0; k < 5; ++k) {
            std::size_t used = 0;
            try {
                v[k] = std::stod(f[k], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != f[k].size())
                throw FormatError("mission profile: row " + std::to_string(row) + " has a non-numeric field");
        }
        samples.push_back({v[0], {{v[1], v[2]}, {v[3], v[4]}}});
    }
    return MissionProfile(std::move(samples));
}

inline MissionProfile load_mission_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("mission profile: cannot open " + path);
    return parse_mission_profile(in);
}

}  // namespace mippv
