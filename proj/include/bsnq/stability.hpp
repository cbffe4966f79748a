/// @file stability.hpp
/// @brief Variational growth-rate machinery on streamfunction degrees of freedom.
///
/// Velocities are parameterized as u = -psi_z, w = psi_x with psi = 0 on both walls,
/// so the unknowns are psi at the interior levels (Nx * (Nz - 2) values, x-major).
///   B  : J(u)  = integral |u|^2            (realized as -psi . lap_d psi)
///   A1 : E1(u) = integral |grad u|^2 + alpha * integral_{z=0} u^2
///                (through integral |grad u|^2 = integral omega^2, with the wall vorticity
///                 omega = -alpha u at z = 0 and omega = 0 at z = h)
///   A2 : E2(u) = integral delta (u . grad Psi)^2 - f (alpha0 + f) integral u^2
/// alpha(s) is the smallest eigenvalue of (s nu A1 - A2) x = mu B x and the growth rate
/// is the root of Phi(s) = -s^2 - alpha(s).
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "bsnq/grid.hpp"
#include "bsnq/steady_states.hpp"

namespace bsnq {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct QuadraticForms {
    Grid grid;
    SparseMatrix A1;
    SparseMatrix A2;
    SparseMatrix B;
    double nu = 0.0;
    /// Lower bound for the spectrum of (-A2, B); used to place iterative shifts.
    double a2_bound = 0.0;

    int dofs() const { return static_cast<int>(B.rows()); }
    /// Interior psi vector -> full field (zero walls).
    ScalarField to_field(const Eigen::VectorXd& x) const;
    /// Full field -> interior psi vector (wall rows dropped).
    Eigen::VectorXd from_field(const ScalarField& psi) const;
};

QuadraticForms assemble_forms(const SteadyState& ss, const PhysicalParams& p, const Grid& grid);

/// max |M - M^T|
double max_asymmetry(const SparseMatrix& m);

enum class EigenMethod { Auto, Dense, Iterative };

struct EigenOptions {
    EigenMethod method = EigenMethod::Auto;
    int dense_max_dofs = 1100;
    double tol = 1e-10;      ///< backward-error tolerance for the iterative solver
    int max_iterations = 500;
    int block_size = 8;
};

struct AlphaResult {
    double alpha = 0.0;
    Eigen::VectorXd mode;  ///< B-normalized
    double residual = 0.0; ///< ||(M - alpha B) x|| / ((||M||_1 + |alpha| ||B||_1) ||x||)
    int iterations = 0;
};

/// Smallest generalized eigenpair of (s nu A1 - A2, B). Throws EigenNotConverged.
AlphaResult alpha_of_s(const QuadraticForms& forms, double s, const EigenOptions& options = {});

/// Eigenvalue-only evaluation reusing a dense Cholesky reduction. Cheaper inside root finding.
class AlphaEvaluator {
public:
    AlphaEvaluator(const QuadraticForms& forms, EigenOptions options = {});
    double alpha(double s) const;
    AlphaResult solve(double s) const;
    bool dense() const { return dense_; }

private:
    const QuadraticForms* forms_;
    EigenOptions options_;
    bool dense_ = false;
    Eigen::MatrixXd C1_, C2_;  // L^{-1} A L^{-T} with B = L L^T
    Eigen::MatrixXd Linv_t_;   // L^{-T}
};

enum class Verdict { Unstable, Stable, Indeterminate };
std::string to_string(Verdict v);

struct AlphaSample {
    double s = 0.0;
    double alpha = 0.0;
};

struct LambdaOptions {
    double s_min = 1e-4;
    double s_max = 1e3;
    int probes_per_decade = 4;
    double root_rel_tol = 1e-10;  ///< |Phi| <= root_rel_tol * max(1, s^2)
    int max_bisections = 200;
    EigenOptions eigen;
};

struct EigenResult {
    Verdict verdict = Verdict::Indeterminate;
    double s_star = 0.0;
    double lambda0 = 0.0;
    double phi_at_root = 0.0;
    std::vector<AlphaSample> alpha_samples;
    ScalarField mode_psi;
    ScalarField mode_u;
    ScalarField mode_w;
    Eigen::VectorXd mode;
    std::string diagnostics;
};

/// Probes alpha(s) on a geometric grid, brackets the sign change of Phi and bisects.
EigenResult find_lambda0(const QuadraticForms& forms, const LambdaOptions& options = {});

enum class Branch { UnstableBranch, StableBranch, Outside };

struct ConditionsReport {
    double max_delta = 0.0;
    double f_plus_alpha0 = 0.0;
    Branch branch = Branch::Outside;
    bool agrees = true;  ///< verdict matches the branch prediction (always true when Outside)
    std::string note;
};

struct Classification {
    EigenResult result;
    ConditionsReport conditions;
};

/// assemble_forms -> find_lambda0, plus the sign-condition report.
Classification classify(const SteadyState& ss, const PhysicalParams& p, const Grid& grid,
                        const LambdaOptions& options = {});

}  // namespace bsnq
