#pragma once

#include <stdexcept>
#include <string>

namespace qcdirac {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad sizes or parameters handed to an operation.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

// A function or derivative evaluated to a non-finite value.
class EvaluationError : public Error {
public:
    EvaluationError(const std::string& what, long index = -1)
        : Error(index >= 0 ? what + " (component " + std::to_string(index) + ")" : what), index_(index) {}

    long index() const noexcept { return index_; }

private:
    long index_;
};

// Z(X) is singular or near-singular; `first`/`second` name the worst-conditioned pair.
class DegenerateConstraintError : public Error {
public:
    DegenerateConstraintError(const std::string& what, int first, int second)
        : Error(what + " (constraints " + std::to_string(first) + ", " + std::to_string(second) + ")"),
          first_(first), second_(second) {}

    int first() const noexcept { return first_; }
    int second() const noexcept { return second_; }

private:
    int first_;
    int second_;
};

// Two adiabatic energies closer than the gap floor.
class DegeneracyError : public Error {
public:
    DegeneracyError(const std::string& what, int alpha, int beta)
        : Error(what + " (states " + std::to_string(alpha) + ", " + std::to_string(beta) + ")"),
          alpha_(alpha), beta_(beta) {}

    int alpha() const noexcept { return alpha_; }
    int beta() const noexcept { return beta_; }

private:
    int alpha_;
    int beta_;
};

class FrustratedHop : public Error {
public:
    using Error::Error;
};

class StepRejected : public Error {
public:
    using Error::Error;
};

class PathTooCoarse : public Error {
public:
    using Error::Error;
};

class ProjectionFailure : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class RunError : public Error {
public:
    using Error::Error;
};

}  // namespace qcdirac
