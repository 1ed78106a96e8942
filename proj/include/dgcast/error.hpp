#pragma once

#include <stdexcept>
#include <string>

namespace dgcast {

// Root of every exception the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes are incompatible for the requested primitive.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A primitive was evaluated outside its mathematical domain (log of 0, division by 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Misuse of the differentiation engine: non-scalar loss, consumed graph, missing gradient.
class GraphError : public Error {
public:
    using Error::Error;
};

// Malformed input data or configuration that references unusable data.
class DataError : public Error {
public:
    using Error::Error;
};

// Invalid configuration values or a violated precondition on user-supplied parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Optimization diverged or could not be carried out.
class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace dgcast
