#pragma once

#include <stdexcept>
#include <string>

namespace alcurve {

// Base for everything the library throws on bad input or failed numerics.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed graphs, broken invariants, missing ground truth.
class GraphError : public Error {
public:
    using Error::Error;
};

// Degenerate training data, dimension mismatches, bad model files.
class ModelError : public Error {
public:
    using Error::Error;
};

// Singular systems, non-convergence.
class NumericalError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class SessionError : public Error {
public:
    using Error::Error;
};

class SessionNotFound : public SessionError {
public:
    using SessionError::SessionError;
};

} // namespace alcurve
