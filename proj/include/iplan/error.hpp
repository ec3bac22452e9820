#pragma once

#include <stdexcept>
#include <string>

namespace iplan {

// Base error for everything raised by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised by the numerics layer: shape mismatches, NaN gradients, non-scalar
// backward roots.
struct NumericsError : Error {
    explicit NumericsError(const std::string& msg) : Error(msg) {}
};

// Unreadable or inconsistent run configuration.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Checkpoint file with a wrong magic line or format version.
struct CheckpointVersionError : Error {
    explicit CheckpointVersionError(const std::string& msg) : Error(msg) {}
};

// Environment faults: infeasible spawns, unknown agent ids, bad actions.
struct EnvError : Error {
    explicit EnvError(const std::string& msg) : Error(msg) {}
};

}  // namespace iplan
