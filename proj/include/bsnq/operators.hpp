/// @file operators.hpp
/// @brief Differential operators and per-Fourier-mode elliptic solves.
///
/// x-derivatives are spectral (Nyquist mode of first derivatives zeroed);
/// z-derivatives are second-order finite differences. The discrete Laplacian
/// uses the spectral symbol -k^2 in x and the compact 3-point stencil in z.
#pragma once

#include "bsnq/grid.hpp"

namespace bsnq {

enum class ZStencil {
    Interior,            ///< centered stencil at interior levels, wall rows set to zero
    OneSidedAtBoundary,  ///< centered interior, second-order one-sided at the walls
};

ScalarField ddx(const ScalarField& f);
/// Spectral second x-derivative (-k^2 for every stored mode, Nyquist included).
ScalarField d2dx2(const ScalarField& f);
ScalarField ddz(const ScalarField& f, ZStencil hint = ZStencil::OneSidedAtBoundary);
/// Summation-by-parts z-derivative: centered interior, first-order closure at the walls.
/// Skew-adjoint (up to wall terms) under the trapezoidal inner product.
ScalarField ddz_sbp(const ScalarField& f);

/// Discrete Laplacian at interior levels; wall rows are zero.
ScalarField laplacian(const ScalarField& f);

/// Solves lap(psi) = rhs at interior levels with psi = 0 on both walls.
ScalarField poisson_dirichlet(const ScalarField& rhs);

struct NeumannOptions {
    /// Raw compatibility defect tolerated, relative to the data scale, before
    /// the k = 0 mean correction is applied.
    double compat_rel_tol = 0.05;
};

struct NeumannReport {
    double defect = 0.0;  ///< integral(rhs) - (flux_top - flux_bottom), before correction
    double scale = 0.0;
};

/// Zero-mean solution of lap(p) = rhs with dp/dz = flux.bottom at z = 0 and
/// dp/dz = flux.top at z = h (ghost-point closure). Throws NeumannIncompatible
/// when the solvability defect exceeds options.compat_rel_tol * scale.
ScalarField poisson_neumann(const ScalarField& rhs, const BoundaryPair& flux, const NeumannOptions& options = {},
                            NeumannReport* report = nullptr);

/// Solves (I - c*lap) x = rhs at interior levels; wall rows of x are taken from `walls`.
ScalarField solve_helmholtz_dirichlet(const ScalarField& rhs, double c, const BoundaryPair& walls);

/// (I - c lap) omega = rhs at interior levels with omega = 0 at z = h and the slip
/// vorticity omega = -alpha u = alpha psi_z at z = 0 imposed implicitly (lap psi = omega,
/// psi = 0 on both walls). The returned field carries the consistent wall rows.
ScalarField solve_helmholtz_slip(const ScalarField& rhs, double c, double alpha);

struct Velocity {
    ScalarField u;
    ScalarField w;
};

/// u = -d(psi)/dz, w = d(psi)/dx. Throws InvalidArgument if psi is not zero on the walls.
Velocity velocity_from_psi(const ScalarField& psi);

ScalarField divergence(const ScalarField& u, const ScalarField& w);

/// Orszag 2/3 rule: drops every x-mode with k > Nx/3.
ScalarField dealias_23(const ScalarField& f);

BoundaryPair wall_traces(const ScalarField& f);

}  // namespace bsnq
