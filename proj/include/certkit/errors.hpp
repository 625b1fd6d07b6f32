#pragma once

#include <stdexcept>
#include <string>

namespace certkit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// A matrix that must be Schur stable is not (spectral radius >= 1).
class InstabilityError : public Error {
public:
    InstabilityError(const std::string& what, double radius)
        : Error(what), radius_(radius) {}
    double radius() const noexcept { return radius_; }

private:
    double radius_;
};

class SingularityError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class StructureError : public Error {
public:
    using Error::Error;
};

class GridError : public Error {
public:
    using Error::Error;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

class OutOfWinningSetError : public Error {
public:
    using Error::Error;
};

} // namespace certkit
