#pragma once

#include <stdexcept>
#include <string>

namespace tensorlift {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A parameter stack has a zero row, so class-level operations are undefined.
struct DegenerateParams : Error {
    using Error::Error;
};

/// Shapes of two objects do not line up (stack sizes, tensor orders, operator dims).
struct DimensionMismatch : Error {
    using Error::Error;
};

/// Materializing a dense object would exceed the configured entry budget.
struct BudgetExceeded : Error {
    using Error::Error;
};

/// A network description violates a structural invariant.
struct InvalidTopology : Error {
    using Error::Error;
};

/// An edge sequence is not a leaf-to-root path of the given network.
struct InvalidPath : Error {
    using Error::Error;
};

/// Arguments are out of the documented range for a constructor or factory.
struct InvalidParameters : Error {
    using Error::Error;
};

/// An operation that needs a certified network was given one that fails the check.
struct TopologyNotCertified : Error {
    using Error::Error;
};

} // namespace tensorlift
