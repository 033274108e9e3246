#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sfpe {

/// Precondition violated by a caller-supplied argument.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Requested evaluation lies outside the represented domain.
class OutOfRange : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Linear solve against sigma failed its residual check.
class IllConditionedSigma : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A Monte-Carlo sweep could not produce a usable estimate.
class FailedSweep : public std::runtime_error {
public:
    FailedSweep(const std::string& what, std::size_t node)
        : std::runtime_error(what), node_(node) {}

    std::size_t node() const noexcept { return node_; }

private:
    std::size_t node_;
};

/// Configuration or problem file error, tagged with the offending field.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error(what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace sfpe
