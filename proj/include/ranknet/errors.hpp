#pragma once

#include <stdexcept>
#include <string>

namespace ranknet {

// Input-side failures (bad files, bad arguments, bad data). The CLI maps
// these to exit code 2, everything else to exit code 1.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : InputError {
    explicit ConfigError(const std::string& msg) : InputError(msg) {}
};

// Parse failure in an external file; message carries the 1-based line number.
struct ParseError : InputError {
    ParseError(const std::string& path, long line, const std::string& msg)
        : InputError(path + ":" + std::to_string(line) + ": " + msg), line_number(line) {}
    long line_number;
};

struct IoError : InputError {
    explicit IoError(const std::string& msg) : InputError(msg) {}
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Divergence or non-finite loss during an optimization run.
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken internal invariant (e.g. a forward trace fed to the wrong network).
struct InternalError : std::logic_error {
    explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

} // namespace ranknet
