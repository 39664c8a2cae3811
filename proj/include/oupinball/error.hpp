#pragma once

#include <stdexcept>
#include <string>

namespace oupinball {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range user input.
class InputError : public Error {
public:
    using Error::Error;
};

/// A projection onto the domain is undefined (e.g. the obstacle center).
class ProjectionError : public Error {
public:
    using Error::Error;
};

/// A numeric routine could not reach its accuracy target.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// A root or bracket search found nothing in its scan window.
class NotFound : public Error {
public:
    using Error::Error;
};

/// Discretized domain splits into more than one component.
class DomainDisconnected : public Error {
public:
    using Error::Error;
};

/// An iterative solver ran out of iterations.
class IterationLimit : public Error {
public:
    using Error::Error;
};

/// A grid would exceed its configured cell budget.
class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& msg, double suggested_h = 0.0)
        : Error(msg), suggested_h_(suggested_h) {}
    double suggested_h() const noexcept { return suggested_h_; }

private:
    double suggested_h_;
};

/// Monte Carlo path failed after all retries.
class SimulationError : public Error {
public:
    using Error::Error;
};

}  // namespace oupinball
