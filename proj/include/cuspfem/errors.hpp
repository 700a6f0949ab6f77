#pragma once

#include <stdexcept>
#include <string>

namespace cuspfem {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// The mesher could not produce an admissible triangulation.
class MeshingError : public Error {
public:
    MeshingError(const std::string& what, std::string region)
        : Error(what + " (region: " + region + ")"), region_(std::move(region)) {}
    const std::string& region() const noexcept { return region_; }

private:
    std::string region_;
};

/// Coefficient data failed an admissibility condition; `condition()` names it.
class ValidationError : public Error {
public:
    ValidationError(std::string condition, const std::string& detail)
        : Error(condition + ": " + detail), condition_(std::move(condition)) {}
    const std::string& condition() const noexcept { return condition_; }

private:
    std::string condition_;
};

/// The averaging window of the decomposition leaves the peak region.
class WindowOutOfDomain : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace cuspfem
