#pragma once

#include <stdexcept>
#include <string>

namespace manipulant {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Mismatched matrix/vector dimensions between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input failed a symmetric-positive-definite requirement.
class SpdError : public Error {
public:
    SpdError(const std::string& what, double min_eigenvalue)
        : Error(what), min_eigenvalue(min_eigenvalue) {}
    double min_eigenvalue;
};

/// An iterative solver exhausted its iteration budget.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual, int iterations)
        : Error(what), residual(residual), iterations(iterations) {}
    double residual;
    int iterations;
};

/// Geometric or kinematic infeasibility (unreachable pose, bad grasp, ...).
class KinematicsError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. `line` is 1-based, 0 if unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line = 0) : Error(what), line(line) {}
    int line;
};

}  // namespace manipulant
