#pragma once

#include <stdexcept>
#include <string>

namespace kml {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on numeric arguments was violated (ranges, pairings).
class invalid_argument : public error {
public:
    using error::error;
};

/// Two objects that must share a grid do not.
class grid_mismatch : public error {
public:
    grid_mismatch() : error("field does not live on the expected grid") {}
};

/// Requested mass lies outside the set where a minimizer exists.
class outside_existence_region : public error {
public:
    using error::error;
};

/// An iterative procedure did not reach its tolerance.
class convergence_error : public error {
public:
    using error::error;
};

/// A computed or loaded object fails one of its structural invariants.
class invariant_violation : public error {
public:
    using error::error;
};

/// Ground-state cache problems: version, checksum, key mismatch, write conflict.
class cache_error : public error {
public:
    using error::error;
};

} // namespace kml
