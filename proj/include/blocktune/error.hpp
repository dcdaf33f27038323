#pragma once

#include <stdexcept>
#include <string>

namespace blocktune {

// Fatal pipeline failure (I/O, broken environment). Maps to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or usage. Maps to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A caller broke a documented precondition.
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace blocktune
