#pragma once

#include <stdexcept>
#include <string>

namespace cavity_vacua {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid counts, cutoffs or other scalar arguments.
struct ArgumentError : Error {
    using Error::Error;
};

// Inconsistent dipole placement relative to the plates.
struct GeometryError : Error {
    using Error::Error;
};

// Arguments outside the domain of a formula.
struct DomainError : Error {
    using Error::Error;
};

// Coincident dipoles.
struct SingularityError : Error {
    using Error::Error;
};

// Requested Hilbert space exceeds a guard.
struct DimensionError : Error {
    using Error::Error;
};

struct SolverError : Error {
    using Error::Error;
};

// Malformed run configuration.
struct SchemaError : Error {
    using Error::Error;
};

// Output path cannot be written.
struct IoError : Error {
    using Error::Error;
};

}  // namespace cavity_vacua
