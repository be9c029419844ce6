#pragma once

#include <stdexcept>
#include <string>

namespace fedluar {

// Bad user-supplied configuration (flags, config keys, infeasible sizes).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad runtime input (labels out of range, malformed data rows).
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken internal invariant (structure mismatch between vectors that must agree).
struct InternalError : std::logic_error {
    explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

// Client/server contract violation (update covers the wrong layer set).
struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

// Data generation could not satisfy its postconditions (e.g. empty shards).
struct GenerationError : std::runtime_error {
    explicit GenerationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failure while writing results.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fedluar
