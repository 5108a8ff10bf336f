#pragma once

#include <stdexcept>
#include <string>

namespace warm {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operands whose grid shapes do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

// An argument outside the domain of an operation (negative blur, bad index, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// A computation produced non-finite values or a factorization failed.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace warm
