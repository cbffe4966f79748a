/// @file config.hpp
/// @brief Run configuration documents (JSON) and initial-condition construction.
///
/// Schema (keys not listed are rejected):
///
///     grid:       Nx, Nz (required); Lx = 2 pi, h = 1
///     params:     f, nu, alpha, alpha0 (required); a0 = alpha0, a1 = 0, gamma = 1,
///                 beta = gamma * max_{z=h} Psi + 1, rho_ref = 0
///     potential:  {kind: "linear_z", g} | {kind: "harmonic_mode", g, eps, m}
///                 | {kind: "tabulated", psi, psi_x, psi_z}   (snapshot file paths)
///     delta:      {kind: "constant", c} | {kind: "function_of_psi", coeffs}
///                 | {kind: "tabulated", file}
///     mode:       "nonlinear" (default) | "linearized"
///     initial:    one perturbation or an array of them (summed); default none
///                 {kind: "single_mode", field = "psi", amplitude, m = 1, n = 1, phase = 0}
///                 {kind: "random", field = "psi", amplitude, max_m = 4, max_n = 4, seed = <top-level seed>}
///                 {kind: "file", psi?, rho?, v?}
///     time:       T_end = 10, dt = 0.05 (upper bound), cfl_target = 0.5, adaptive = true,
///                 dealias = true, observe_every = 10 (norms, decay series, snapshots;
///                 the energy ledger records every step)
///     output:     dir = "bsnq_out", snapshot_every = 0 (observations; 0 = final only)
///     diagnostics: w1s_exponents = [4], balance_proxy = false
///     stability:  s_min = 1e-4, s_max = 1e3, probes_per_decade = 4, method = "auto",
///                 dense_max_dofs = 1100, tol = 1e-10, max_iterations = 500
///     verify:     budget_rel_tol = 0.01, drift_tol = 1e-3
///     seed:       0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bsnq/diagnostics.hpp"
#include "bsnq/dynamics.hpp"
#include "bsnq/stability.hpp"
#include "bsnq/steady_states.hpp"

namespace bsnq {

struct Perturbation {
    enum class Kind { SingleMode, Random, File };
    Kind kind = Kind::SingleMode;
    std::string field = "psi";  ///< psi | rho | v
    double amplitude = 0.0;
    int m = 1;                  ///< x wavenumber index, k = 2 pi m / Lx
    int n = 1;                  ///< z mode, sin(n pi z / h)
    double phase = 0.0;
    int max_m = 4;
    int max_n = 4;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::filesystem::path psi_file, rho_file, v_file;
};

struct RunConfig {
    double Lx = 0.0, h = 1.0;
    int Nx = 0, Nz = 0;

    PhysicalParams params;
    double a0 = 0.0, a1 = 0.0, rho_ref = 0.0;

    PotentialSpec potential;
    DeltaSpec delta;
    // Source paths of tabulated inputs, echoed to the manifest.
    std::filesystem::path psi_file, psi_x_file, psi_z_file, delta_file;

    Mode mode = Mode::Nonlinear;
    std::vector<Perturbation> initial;

    double T_end = 10.0;
    double dt = 0.05;
    double cfl_target = 0.5;
    bool adaptive = true;
    bool dealias = true;
    int observe_every = 10;

    std::filesystem::path output_dir = "bsnq_out";
    int snapshot_every = 0;

    std::vector<double> w1s_exponents{4.0};
    bool balance_proxy = false;

    LambdaOptions stability;

    double budget_rel_tol = 1e-2;
    double drift_tol = 1e-3;

    std::uint64_t seed = 0;

    Grid grid() const;
};

/// Parses and validates a document; relative file paths resolve against `base_dir`.
/// Throws ConfigError naming the offending key path.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// The fully materialized configuration as a JSON document.
std::string config_to_json(const RunConfig& cfg);

/// Sum of the configured perturbations, as a synchronized state.
State initial_state(const RunConfig& cfg, const Grid& grid);

}  // namespace bsnq
