#pragma once

#include <stdexcept>
#include <string>

namespace hj {

/// Base class for every failure the solver raises deliberately.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A Hamiltonian or one of its derivatives returned a non-finite value.
struct ModelEvalError : Error {
    using Error::Error;
};

/// The Newton solve for the convex conjugate did not converge, or the
/// momentum Hessian failed to be positive definite along the way.
struct ConjugationError : Error {
    ConjugationError(const std::string& what, double residual_)
        : Error(what), residual(residual_) {}
    double residual;
};

/// Scheme constants came out non-finite or inconsistent.
struct ConstantsError : Error {
    using Error::Error;
};

/// Invalid configuration: grid ratio above the stability threshold,
/// bad periods, malformed config files, inconsistent ladders.
struct ConfigError : Error {
    using Error::Error;
};

/// A discrete gradient left the a priori bound during time stepping.
struct StabilityError : Error {
    using Error::Error;
};

/// Query outside the stored cone, box, or time horizon.
struct OutOfDomainError : Error {
    using Error::Error;
};

/// Malformed caller input (wrong dimension, wrong parity, bad range).
struct InputError : Error {
    using Error::Error;
};

/// A transition kernel left [0,1]; the control violated its bound.
struct ProbabilityError : Error {
    using Error::Error;
};

/// Exhaustive path enumeration would exceed the configured cap.
struct EnumerationCapError : Error {
    using Error::Error;
};

/// A per-level gradient-difference sum increased where it must not.
struct ContractionError : Error {
    using Error::Error;
};

/// The reference solution is unavailable or ill-posed for this query.
struct OracleError : Error {
    using Error::Error;
};

/// A backward characteristic is not unique at the queried point.
struct AmbiguousCharacteristicError : OracleError {
    using OracleError::OracleError;
};

} // namespace hj
