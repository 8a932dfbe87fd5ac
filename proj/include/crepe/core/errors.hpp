#pragma once

#include <stdexcept>
#include <string>

namespace crepe {

enum class ExitCode : int { ok = 0, config = 2, numerical = 3, io = 4 };

class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg, ExitCode code)
        : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)), code_(code) {}

    const std::string& kind() const noexcept { return kind_; }
    ExitCode code() const noexcept { return code_; }

private:
    std::string kind_;
    ExitCode code_;
};

// kinds: invalid-config, invalid-schedule, shape, unsupported-reference, enumeration-guard, ...
class ConfigError : public Error {
public:
    ConfigError(std::string kind, const std::string& msg) : Error(std::move(kind), msg, ExitCode::config) {}
};

// kinds: non-finite, degenerate-kernel, degenerate-weights
class NumericalError : public Error {
public:
    NumericalError(std::string kind, const std::string& msg)
        : Error(std::move(kind), msg, ExitCode::numerical) {}
};

class IoError : public Error {
public:
    IoError(std::string kind, const std::string& msg) : Error(std::move(kind), msg, ExitCode::io) {}
};

}  // namespace crepe
