#pragma once

#include <stdexcept>
#include <string>

namespace ivuskit {

// Base class for all failures surfaced by the toolkit.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input violates a documented invariant (bad manifest field, mask level count, ...).
struct ValidationError : Error {
    using Error::Error;
};

// Filesystem / decode / encode failure. Message names the offending path.
struct IoError : Error {
    using Error::Error;
};

// A geometric measurement cannot be taken on this region.
struct MeasurementError : Error {
    using Error::Error;
};

// Input is degenerate for the requested computation (e.g. constant map for Otsu).
// Callers that have a documented fallback catch this type specifically.
struct DegenerateInputError : Error {
    using Error::Error;
};

}  // namespace ivuskit
