#pragma once

#include <stdexcept>
#include <string>

namespace mippv {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite input or a parameter set that violates its invariants.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Panel fit did not reproduce the datasheet points.
class CalibrationError : public Error {
public:
    using Error::Error;
};

/// Duty or gating constraint violated (e.g. d1 + d2 > 1 with alternating slots).
class ConstraintError : public Error {
public:
    using Error::Error;
};

/// Boost duty at or above 1.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// Integration produced a non-finite state.
class BlowUpError : public Error {
public:
    BlowUpError(const std::string& what, double t) : Error(what), time_(t) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Malformed input file (mission profile, waveform CSV).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Scenario document problem; the message names the offending key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File could not be opened or written.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace mippv
