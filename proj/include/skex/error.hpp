#pragma once

#include <stdexcept>
#include <string>

namespace skex {

// Bad arguments to a kernel operation (non-positive radius, dimension
// mismatch, out-of-range t, ...).
struct InvalidParameter : std::invalid_argument {
    explicit InvalidParameter(const std::string& msg) : std::invalid_argument(msg) {}
};

// A file could not be read or written.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// A file was read but its contents are malformed. line is 1-based, 0 when
// the error is not tied to a specific line (e.g. binary formats).
struct ParseError : std::runtime_error {
    int line;
    ParseError(const std::string& file, int line_, const std::string& msg)
        : std::runtime_error(file + ":" + std::to_string(line_) + ": " + msg), line(line_) {}
};

}  // namespace skex
