#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace ktemper {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent model (dimensions, masks, non-finite entries).
class ModelError : public Error {
public:
    using Error::Error;
};

/// Control sequence of the wrong length or with an action the mask forbids.
class SequenceError : public Error {
public:
    using Error::Error;
};

/// Invalid solver, ladder, or baseline configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Overflowed or otherwise non-finite energy, cost, or probability.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what, std::optional<std::size_t> action = {})
        : Error(what), action_(action) {}

    /// Action index whose energy was non-finite, when known.
    std::optional<std::size_t> action() const { return action_; }

private:
    std::optional<std::size_t> action_;
};

/// Exhaustive enumeration refused because the state count exceeds the cap.
/// The count is kept in decimal so arbitrarily large spaces can be reported.
class EnumerationRefused : public Error {
public:
    EnumerationRefused(const std::string& what, std::string count)
        : Error(what), count_(std::move(count)) {}

    const std::string& count() const { return count_; }

private:
    std::string count_;
};

/// Not enough (or no) transitions to fit the dynamics of some action.
class FitError : public Error {
public:
    FitError(const std::string& what, std::optional<std::size_t> action = {})
        : Error(what), action_(action) {}

    std::optional<std::size_t> action() const { return action_; }

private:
    std::optional<std::size_t> action_;
};

/// Text input that fails to parse; line and column are 1-based, 0 if unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
        : Error(what), line_(line), column_(column) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Argument outside the domain of an operation (e.g. a row off the simplex).
class InputError : public Error {
public:
    using Error::Error;
};

}  // namespace ktemper
