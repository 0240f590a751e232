#ifndef OMCAV_ERRORS_HPP
#define OMCAV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace omcav {

// Base class for everything thrown by this library. The three broad
// categories below map onto the CLI exit-code contract:
//   InputError       -> exit 1 (bad files, bad config, bad arguments)
//   DomainError      -> exit 2 (valid input, no physical answer)
//   ConvergenceError -> exit 3 (optimizer gave up)
//   InsufficientData -> exit 4 (not enough points to fit)
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InputError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct ConvergenceError : Error {
    using Error::Error;
};
struct InsufficientData : Error {
    using Error::Error;
};

// --- input / parse ---
struct ParseError : InputError {
    using InputError::InputError;
};
struct ValidationError : InputError {
    using InputError::InputError;
};
struct MissingMetadata : InputError {
    using InputError::InputError;
};

// --- netfoster ---
struct GridAtPole : DomainError {
    using DomainError::DomainError;
};
struct EmptyNetwork : ValidationError {
    using ValidationError::ValidationError;
};
struct NoModeFound : DomainError {
    using DomainError::DomainError;
};
struct GridTooCoarse : DomainError {
    using DomainError::DomainError;
};
struct NonPositiveCp : ValidationError {
    using ValidationError::ValidationError;
};

// --- omresponse ---
struct NonPositiveRate : ValidationError {
    using ValidationError::ValidationError;
};
struct NegativeCooperativity : ValidationError {
    using ValidationError::ValidationError;
};
struct MissingAttenuation : InputError {
    using InputError::InputError;
};
struct MissingMass : InputError {
    using InputError::InputError;
};

// --- fitkit ---
struct NoResonanceFound : DomainError {
    using DomainError::DomainError;
};
struct NoDipFound : DomainError {
    using DomainError::DomainError;
};
struct DegenerateFit : DomainError {
    using DomainError::DomainError;
};
struct NegativeSlope : DomainError {
    using DomainError::DomainError;
};
struct TooFewPoints : InsufficientData {
    using InsufficientData::InsufficientData;
};
struct NotConverged : ConvergenceError {
    using ConvergenceError::ConvergenceError;
};
struct SingularJacobian : ConvergenceError {
    using ConvergenceError::ConvergenceError;
};
struct NonFiniteResidual : InputError {
    using InputError::InputError;
};

// --- electrotune ---
struct PullInExceeded : DomainError {
    using DomainError::DomainError;
};

}  // namespace omcav

#endif  // OMCAV_ERRORS_HPP
