#pragma once

#include <stdexcept>
#include <string>

namespace mfdelay {

// Thrown when a simulation or solver produces non-finite values or an
// otherwise unusable numerical state. The CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when inputs violate a documented precondition (bad grid ratios,
// inadmissible controls, misaligned measures). Maps to exit code 2 when it
// escapes config handling.
struct PreconditionError : std::invalid_argument {
    explicit PreconditionError(const std::string& msg) : std::invalid_argument(msg) {}
};

} // namespace mfdelay
