#pragma once

#include <stdexcept>
#include <string>

namespace tractoform {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad caller-supplied value (precondition violation, unknown name, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated or unsupported file.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A numerical step could not produce a valid result.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace tractoform
