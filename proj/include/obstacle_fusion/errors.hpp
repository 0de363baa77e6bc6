#pragma once

#include <stdexcept>
#include <string>

namespace obstacle_fusion {

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Input file violates its documented format. Messages carry "path:line:".
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Inconsistent or incomplete run configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Degenerate geometry or a non-finite value in a numerical routine.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace obstacle_fusion
