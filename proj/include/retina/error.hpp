#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace retina {

// Exit-code buckets used by the CLI: usage/config = 1, data/parse = 2,
// runtime/numeric = 3.
enum class ErrorCategory : int { usage = 1, data = 2, runtime = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

/// Invalid argument values: bad ranges, empty shapes, rates outside [0,1), ...
class ValueError : public Error {
public:
    explicit ValueError(const std::string& m) : Error(ErrorCategory::usage, m) {}
};

/// API misuse: backward without a cached forward, mismatched pool cache, ...
class UsageError : public Error {
public:
    explicit UsageError(const std::string& m) : Error(ErrorCategory::usage, m) {}
};

/// Config-file and pre-flight validation failures.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& m) : Error(ErrorCategory::usage, m) {}
};

/// Structured text that failed to parse; carries a 1-based line number when known.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& m, std::size_t line = 0)
        : Error(ErrorCategory::data,
                line ? m + " (line " + std::to_string(line) + ")" : m),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& m) : Error(ErrorCategory::data, m) {}
};

/// Model-container damage: bad magic, version mismatch, checksum failure.
class IntegrityError : public Error {
public:
    explicit IntegrityError(const std::string& m) : Error(ErrorCategory::data, m) {}
};

/// Tensor shape disagreements between connected operations.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& m) : Error(ErrorCategory::runtime, m) {}
};

/// Non-finite values or other numeric breakdowns.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& m) : Error(ErrorCategory::runtime, m) {}
};

}  // namespace retina
