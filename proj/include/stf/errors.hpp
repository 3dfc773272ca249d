#pragma once

#include <stdexcept>
#include <string>

namespace stf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition on an argument was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Non-integer power requested of a value <= 0.
class NegativeBase : public Error {
public:
    using Error::Error;
};

/// A field that must be strictly positive has a node <= 0.
class NonPositiveField : public Error {
public:
    using Error::Error;
};

class DecayTooWeak : public Error {
public:
    using Error::Error;
};

class MobilityOutOfRange : public Error {
public:
    using Error::Error;
};

class TruncationTooLarge : public Error {
public:
    using Error::Error;
};

class AlphaSingular : public Error {
public:
    using Error::Error;
};

class AlphaOutOfRange : public Error {
public:
    using Error::Error;
};

class LinearSolveFailure : public Error {
public:
    using Error::Error;
};

/// Malformed, incomplete or inconsistent experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace stf
