#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qvlc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An input value is outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A configuration or table violates one of its invariants.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Matrix or vector shapes do not match the system configuration.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A policy violates the row-sum, range, or support constraints.
class InvalidPolicyError : public Error {
public:
    using Error::Error;
};

/// The chain has more than one recurrent closed class, so its stationary
/// distribution is not unique.
class NotUnichainError : public Error {
public:
    NotUnichainError(std::vector<std::vector<int>> classes, std::vector<int> transient);

    const std::vector<std::vector<int>>& recurrent_classes() const noexcept { return classes_; }
    const std::vector<int>& transient() const noexcept { return transient_; }

private:
    std::vector<std::vector<int>> classes_;
    std::vector<int> transient_;
};

/// A degenerate policy does not have the single-threshold shape.
class NotThresholdFormError : public Error {
public:
    explicit NotThresholdFormError(std::vector<int> states);

    const std::vector<int>& violating_states() const noexcept { return states_; }

private:
    std::vector<int> states_;
};

/// The power budget is below the smallest budget that keeps the queue stable.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, double min_power)
        : Error(what), min_power_(min_power) {}

    double min_power() const noexcept { return min_power_; }

private:
    double min_power_;
};

/// The brute-force oracle refuses to enumerate this many policies.
class InstanceTooLargeError : public Error {
public:
    using Error::Error;
};

}  // namespace qvlc
