#pragma once

#include <stdexcept>
#include <string>

namespace mar {

/// Invalid configuration: shapes, layer specs, config files.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated an operation's precondition.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// NaN/Inf encountered in a forward or backward pass, or an optimizer step.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mar
