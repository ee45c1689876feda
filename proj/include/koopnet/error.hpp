#pragma once

#include <stdexcept>
#include <string>

namespace koopnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter set violates one of its invariants.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the domain of a function.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Matrix or record dimensions do not fit the operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Snapshot data carries no usable information (all singular values vanish).
class DegenerateDataError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Malformed input file; the message carries the path and line number.
class ParseError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Broken internal guarantee (e.g. an avalanche that never terminates).
class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace koopnet
