#pragma once

#include <stdexcept>
#include <string>

namespace bhd {

// Error taxonomy maps onto CLI exit codes: config/argument errors -> 2,
// numerical failures -> 3.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid arguments, bad configuration, schema violations.
struct ArgumentError : Error {
    using Error::Error;
};

// A caller handed over data violating a documented precondition
// (e.g. an unnormalized state where a normalized one is required).
struct ContractViolation : ArgumentError {
    using ArgumentError::ArgumentError;
};

// Numerical failures: step-size too large, non-finite amplitudes,
// trace drift beyond tolerance.
struct NumericalError : Error {
    using Error::Error;
};

struct StepSizeError : NumericalError {
    using NumericalError::NumericalError;
};

struct BlowupError : NumericalError {
    using NumericalError::NumericalError;
};

} // namespace bhd
