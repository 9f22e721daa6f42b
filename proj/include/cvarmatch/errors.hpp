#pragma once

#include <stdexcept>
#include <string>

namespace cvarmatch {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes that do not fit together (non-square, mismatched sizes, empty).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of the operation.
class DomainError : public Error {
public:
    using Error::Error;
};

class NotPsdError : public Error {
public:
    using Error::Error;
};

// Brute-force oracles refuse inputs that would take too long.
class SizeGuardError : public Error {
public:
    using Error::Error;
};

// Data that does not admit the requested exact answer (e.g. noiseless matching on noisy data).
class DegenerateInstanceError : public Error {
public:
    using Error::Error;
};

// Threshold formula evaluated where its denominator is not positive.
class DegenerateRegimeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace cvarmatch
