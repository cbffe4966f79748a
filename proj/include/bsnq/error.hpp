/// @file error.hpp
/// @brief Exception hierarchy shared by every bsnq module.
#pragma once

#include "bsnq/format.hpp"

#include <stdexcept>
#include <string>

namespace bsnq {

/// Base class of all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad grid size, negative viscosity, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A field operator produced or received NaN/Inf.
class NonFiniteField : public Error {
public:
    using Error::Error;
};

/// Neumann data violate the discrete solvability condition beyond tolerance.
class NeumannIncompatible : public Error {
public:
    NeumannIncompatible(double defect, double scale)
        : Error("Neumann data incompatible: defect " + fmt_double(defect) +
                " exceeds tolerance (data scale " + fmt_double(scale) + ")"),
          defect_(defect), scale_(scale) {}
    double defect() const noexcept { return defect_; }
    double scale() const noexcept { return scale_; }

private:
    double defect_;
    double scale_;
};

/// delta * grad(Psi) is not (discretely) a gradient.
class Inexact1Form : public Error {
public:
    explicit Inexact1Form(double residual)
        : Error("delta*grad(Psi) is not exact: curl residual " + fmt_double(residual)),
          residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// The primitive of delta*grad(Psi) jumps across the periodic seam.
class NonPeriodicPrimitive : public Error {
public:
    explicit NonPeriodicPrimitive(double jump)
        : Error("primitive of delta*grad(Psi) is not x-periodic: seam jump " + fmt_double(jump)),
          jump_(jump) {}
    double jump() const noexcept { return jump_; }

private:
    double jump_;
};

/// Requested time step exceeds the advective CFL bound.
class CflViolation : public Error {
public:
    CflViolation(double cfl, double limit)
        : Error("CFL number " + fmt_double(cfl) + " exceeds target " + fmt_double(limit)),
          cfl_(cfl), limit_(limit) {}
    double cfl() const noexcept { return cfl_; }
    double limit() const noexcept { return limit_; }

private:
    double cfl_;
    double limit_;
};

/// Eigensolver hit its iteration cap without meeting the residual tolerance.
class EigenNotConverged : public Error {
public:
    EigenNotConverged(int iterations, double residual)
        : Error("eigensolver did not converge after " + std::to_string(iterations) +
                " iterations (residual " + fmt_double(residual) + ")"),
          iterations_(iterations), residual_(residual) {}
    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

/// Configuration document violates the schema; path() names the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Malformed or mismatched file on disk.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace bsnq
