#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xpid {

enum class ErrorCode {
    InvalidArgument,
    NoConvergence,
    NonFinite,
    DegenerateBeta,
    NonPositiveGain,
    InvalidBeta,
    NonPositiveCoefficient,
    DegreeTooLow,
    DimensionMismatch,
    Diverged,
    DivisionByZero,
    SyntaxError,
    UnknownIdentifier,
    ArityError,
    ConfigError,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::DegenerateBeta: return "DegenerateBeta";
        case ErrorCode::NonPositiveGain: return "NonPositiveGain";
        case ErrorCode::InvalidBeta: return "InvalidBeta";
        case ErrorCode::NonPositiveCoefficient: return "NonPositiveCoefficient";
        case ErrorCode::DegreeTooLow: return "DegreeTooLow";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::Diverged: return "Diverged";
        case ErrorCode::DivisionByZero: return "DivisionByZero";
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::UnknownIdentifier: return "UnknownIdentifier";
        case ErrorCode::ArityError: return "ArityError";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Library-wide exception. Every throwing operation tags its failure with a code
/// so callers (and the CLI exit-code mapping) can dispatch without parsing text.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised when a Monte Carlo path leaves the finite region.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t path, double time)
        : Error(ErrorCode::Diverged,
                "path " + std::to_string(path) + " diverged at t=" + std::to_string(time)),
          path_(path), time_(time) {}

    [[nodiscard]] std::size_t path() const noexcept { return path_; }
    [[nodiscard]] double time() const noexcept { return time_; }

private:
    std::size_t path_;
    double time_;
};

}  // namespace xpid
