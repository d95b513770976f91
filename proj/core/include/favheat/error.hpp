#pragma once

#include <stdexcept>
#include <string>

namespace favheat {

/// Base for every error raised by the library. The CLI maps subclasses onto
/// process exit codes (see exit_code()).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments or violated preconditions (bad parameters, mismatched
/// raster shapes, invalid geometry).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Unusable configuration file or missing input path.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Clustering constraints cannot be satisfied (e.g. k exceeds the number of
/// must-link groups).
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// 0 success, 2 config/validation, 3 data/parse, 4 infeasible clustering.
int exit_code(const Error& e) noexcept;

}  // namespace favheat
