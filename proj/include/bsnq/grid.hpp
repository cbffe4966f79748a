/// @file grid.hpp
/// @brief Structured grid on [0,Lx) x [0,h], periodic in x and bounded in z,
///        plus the nodal scalar field type and its quadrature helpers.
///
/// Nodes: x_i = i*dx (i < Nx), z_j = j*dz (j < Nz), so both walls carry nodes.
/// Storage is x-major: value(i, j) lives at index i*Nz + j.
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace bsnq {

struct Grid {
    double Lx = 0.0;
    double h = 0.0;
    int Nx = 0;
    int Nz = 0;

    double dx() const { return Lx / Nx; }
    double dz() const { return h / (Nz - 1); }
    double x(int i) const { return i * dx(); }
    double z(int j) const { return j * dz(); }
    std::size_t size() const { return static_cast<std::size_t>(Nx) * static_cast<std::size_t>(Nz); }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * Nz + j; }

    /// Trapezoidal weight of level j in z (dz/2 at the walls).
    double z_weight(int j) const { return (j == 0 || j == Nz - 1) ? 0.5 * dz() : dz(); }
    /// Wavenumber of Fourier index k (0 <= k <= Nx/2).
    double wavenumber(int k) const;
    double area() const { return Lx * h; }

    bool operator==(const Grid&) const = default;
};

/// Validates and builds a grid. Throws InvalidArgument on odd/small Nx, Nz < 3
/// or non-positive lengths.
Grid build_grid(double Lx, double h, int Nx, int Nz);

/// Nodal samples of a real field. Finite entries are enforced by the operators.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const Grid& grid, double fill = 0.0);
    ScalarField(const Grid& grid, std::vector<double> values);

    /// Samples f(x, z) at every node.
    static ScalarField sample(const Grid& grid, const std::function<double(double, double)>& f);

    const Grid& grid() const { return grid_; }
    double& operator()(int i, int j) { return values_[grid_.index(i, j)]; }
    double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }

    ScalarField& operator+=(const ScalarField& o);
    ScalarField& operator-=(const ScalarField& o);
    ScalarField& operator*=(double a);
    /// this += a * o
    ScalarField& axpy(double a, const ScalarField& o);

    double max_abs() const;
    bool all_finite() const;
    /// Throws NonFiniteField naming `where` if any entry is NaN/Inf.
    void ensure_finite(const std::string& where) const;

    /// Values of one z-level as a vector of length Nx.
    std::vector<double> row(int j) const;

private:
    Grid grid_{};
    std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);
/// Pointwise product.
ScalarField hadamard(const ScalarField& a, const ScalarField& b);

/// Traces of a quantity on the two walls.
struct BoundaryPair {
    std::vector<double> bottom;
    std::vector<double> top;

    static BoundaryPair zeros(const Grid& grid);
};

void require_same_grid(const Grid& a, const Grid& b, const char* where);

/// Deterministic pairwise summation.
double pairwise_sum(std::span<const double> v);

/// Integral over the domain: uniform rule in x, trapezoid in z.
double integrate(const ScalarField& f);
/// Area-weighted mean.
double mean(const ScalarField& f);
/// Integral of f*g.
double inner(const ScalarField& f, const ScalarField& g);
/// (integral |f|^q)^(1/q)
double norm_lq(const ScalarField& f, double q);
inline double norm_l2(const ScalarField& f) { return norm_lq(f, 2.0); }
/// Integral of f^2 over the bottom wall z = 0.
double bottom_trace_l2sq(const ScalarField& f);

}  // namespace bsnq
