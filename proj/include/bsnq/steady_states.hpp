/// @file steady_states.hpp
/// @brief Balanced base states: gravity potential, stratification function delta,
///        rho_s with grad(rho_s) = delta*grad(Psi), p_s with lap(p_s) = -delta*|grad(Psi)|^2,
///        and the analytic shear profile v_s = a0*x + a1 with its pressure p0(x).
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bsnq/grid.hpp"

namespace bsnq {

struct PotentialSpec {
    enum class Kind { LinearZ, HarmonicMode, Tabulated };

    Kind kind = Kind::LinearZ;
    double g = 1.0;      ///< LinearZ, HarmonicMode
    double eps = 0.0;    ///< HarmonicMode amplitude
    int m = 1;           ///< HarmonicMode integer wavenumber, k = 2*pi*m/Lx
    ScalarField psi;     ///< Tabulated
    ScalarField psi_x;   ///< Tabulated
    ScalarField psi_z;   ///< Tabulated

    static PotentialSpec linear_z(double g);
    /// Psi = g*z + eps*exp(k z)*cos(k x).
    static PotentialSpec harmonic_mode(double g, double eps, int m);
    static PotentialSpec tabulated(ScalarField psi, ScalarField psi_x, ScalarField psi_z);
};

std::string to_string(PotentialSpec::Kind k);

/// Nodal samples of Psi.
ScalarField potential_field(const PotentialSpec& spec, const Grid& grid);

struct Gradient {
    ScalarField x;
    ScalarField z;
};

/// grad(Psi) at the nodes: analytic for LinearZ/HarmonicMode, the supplied fields for Tabulated.
Gradient potential_gradient(const PotentialSpec& spec, const Grid& grid);

struct DeltaSpec {
    enum class Kind { Constant, FunctionOfPsi, Tabulated };

    Kind kind = Kind::Constant;
    double c = 0.0;                  ///< Constant
    std::vector<double> coeffs;      ///< FunctionOfPsi: delta = sum_n coeffs[n] * Psi^n
    ScalarField table;               ///< Tabulated

    static DeltaSpec constant(double c);
    static DeltaSpec function_of_psi(std::vector<double> coeffs);
    static DeltaSpec tabulated(ScalarField delta);
};

std::string to_string(DeltaSpec::Kind k);

/// Nodal samples of delta.
ScalarField delta_field(const DeltaSpec& delta, const PotentialSpec& psi, const Grid& grid);

struct PhysicalParams {
    double f = 1.0;
    double nu = 0.1;
    double alpha = 1.0;   ///< Navier slip coefficient at z = 0
    double alpha0 = 0.0;  ///< shear of v_s entering the Coriolis coupling (identified with a0)
    double gamma = 1.0;   ///< Lyapunov weight
    double beta = 0.0;    ///< Lyapunov offset

    /// Throws InvalidArgument for nu <= 0, alpha < 0, f < 0, gamma <= 0 or non-finite values.
    void validate() const;
};

/// Max |lap_d Psi| over interior nodes.
double validate_harmonic(const PotentialSpec& psi, const Grid& grid);

/// Max |d_z(delta Psi_x) - d_x(delta Psi_z)|. Constant kinds use the discrete gradient of the sampled
/// potential (so the mixed partials commute exactly); FunctionOfPsi evaluates D'(Psi) grad(Psi) x grad(Psi),
/// which vanishes identically; Tabulated differentiates the supplied products.
double validate_exactness(const DeltaSpec& delta, const PotentialSpec& psi, const Grid& grid);

/// Max over z-levels of the seam jump Lx * mean_x(delta * Psi_x) of the x-primitive.
double seam_jump(const DeltaSpec& delta, const PotentialSpec& psi, const Grid& grid);

struct ConstructionOptions {
    /// Curl residual tolerated, relative to max|delta grad Psi| / min(Lx, h).
    double curl_rel_tol = 1e-2;
    /// Seam jump tolerated, relative to max|delta grad Psi| * Lx.
    double seam_rel_tol = 1e-8;
};

/// rho_s from lap(rho_s) = div(delta grad Psi), d_z rho_s = delta Psi_z on the walls, rho_s(0,0) = rho_ref.
/// Throws Inexact1Form or NonPeriodicPrimitive.
ScalarField construct_rho_s(const DeltaSpec& delta, const PotentialSpec& psi, double rho_ref, const Grid& grid,
                            const ConstructionOptions& options = {});

/// Zero-mean p_s from lap(p_s) = -delta |grad Psi|^2 with hydrostatic wall flux d_z p_s = -rho_s Psi_z.
ScalarField solve_p_s(const DeltaSpec& delta, const PotentialSpec& psi, const ScalarField& rho_s, const Grid& grid);

/// (f a0 / 2) x^2 + f a1 x
double p0_profile(double f, double a0, double a1, double x);

struct SteadyState {
    DeltaSpec delta;
    PotentialSpec potential;
    double a0 = 0.0;
    double a1 = 0.0;
    double rho_ref = 0.0;
    std::optional<ScalarField> rho_s;
    std::optional<ScalarField> p_s;

    // Nodal caches filled by build_steady_state.
    ScalarField psi;
    Gradient grad_psi;
    ScalarField delta_values;
};

/// Validates the specs and constructs rho_s, p_s and the caches.
SteadyState build_steady_state(const DeltaSpec& delta, const PotentialSpec& potential, double a0, double a1,
                               double rho_ref, const Grid& grid, const ConstructionOptions& options = {});

struct BalanceResiduals {
    double r_geo = 0.0;
    double r_hyd = 0.0;
};

/// Geostrophic and hydrostatic residuals over interior nodes. The analytic parts
/// f v_s - d_x p0 cancel identically and are evaluated in closed form.
BalanceResiduals balance_residuals(const SteadyState& ss, double f, const Grid& grid);

/// Writes rho_s.bsnq, p_s.bsnq and steady.json (f, nu, alpha, a0, a1, delta kind, Psi kind).
void export_steady_bundle(const std::filesystem::path& dir, const SteadyState& ss, const PhysicalParams& params);

}  // namespace bsnq
