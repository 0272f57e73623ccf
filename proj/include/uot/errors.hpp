#pragma once

#include <stdexcept>
#include <string>

namespace uot {

// Error taxonomy shared by all modules. Spec/config problems derive from
// SpecError (CLI exit code 2), runtime numerical failures from NumericError
// (CLI exit code 3).

struct SpecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GridMismatch : SpecError {
    using SpecError::SpecError;
};

struct InvalidDensity : SpecError {
    using SpecError::SpecError;
};

struct InvalidParameter : SpecError {
    using SpecError::SpecError;
};

struct InvalidDelta : SpecError {
    using SpecError::SpecError;
};

struct InvalidSeries : SpecError {
    using SpecError::SpecError;
};

struct Unsupported : SpecError {
    using SpecError::SpecError;
};

struct FeasibilityViolation : NumericError {
    using NumericError::NumericError;
};

struct NumericalBlowup : NumericError {
    NumericalBlowup(const std::string& what, long iterate)
        : NumericError(what + " (iterate " + std::to_string(iterate) + ")"),
          iterate_index(iterate) {}
    long iterate_index;
};

struct MassMismatch : NumericError {
    using NumericError::NumericError;
};

struct OutOfRange : NumericError {
    using NumericError::NumericError;
};

struct OutOfBox : NumericError {
    using NumericError::NumericError;
};

struct BoxExit : NumericError {
    BoxExit(const std::string& what, double t) : NumericError(what), time(t) {}
    double time;
};

struct DegenerateMap : NumericError {
    using NumericError::NumericError;
};

struct Unresolved : NumericError {
    using NumericError::NumericError;
};

struct InternalError : std::logic_error {
    using std::logic_error::logic_error;
};

} // namespace uot
