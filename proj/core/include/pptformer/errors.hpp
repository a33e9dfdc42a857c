#pragma once

#include <stdexcept>
#include <string>

namespace ppt {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown on malformed serialized payloads; carries the byte offset that failed.
struct ParseError : std::runtime_error {
    size_t offset;
    ParseError(const std::string& msg, size_t off)
        : std::runtime_error(msg + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ppt
