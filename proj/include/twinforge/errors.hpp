#pragma once

#include <stdexcept>
#include <string>

namespace twinforge {

// Precondition on an argument's value (negative variance, index out of
// range, zero distance, mismatched shapes).
using DomainError = std::domain_error;

// Operation invoked on an object in the wrong lifecycle state (stepping a
// finished episode, sampling an undersized buffer).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Non-finite values reached a parameter update.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration input.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace twinforge
