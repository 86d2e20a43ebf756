#pragma once

#include <stdexcept>
#include <string>

namespace sanet {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad user-supplied input: malformed files, invalid configs, inconsistent
/// arguments. CLI maps these to exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed on-disk data (IDX magic, undecodable image, bad config text).
class FormatError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Mutually inconsistent inputs (count mismatches, mixed shapes).
class ConsistencyError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Argument outside its documented domain (k >= N, sigma <= 0, ...).
class ParameterError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Patch/window does not fit the source extent.
class GeometryError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A class has fewer members than a stratified request needs.
class CapacityError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Failures discovered while running: CLI maps these to exit code 2.
class RuntimeError : public Error {
public:
    using Error::Error;
};

/// A graph node with zero degree, where D^{-1} is undefined.
class IsolatedNodeError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

/// A sparse-affinity procedure produced a disconnected graph.
class ConnectivityError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

/// An iterative solver failed to converge within its budget.
class ConvergenceError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

/// Input outside a solver's mathematical domain (e.g. non-PSD).
class DomainError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

/// Matrix too large for the dense-oracle path.
class SizeError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

/// Degenerate metric input (zero scatter); carries a sentinel message
/// instead of returning an infinity.
class DegenerateMetricError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

} // namespace sanet
