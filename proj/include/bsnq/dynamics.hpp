/// @file dynamics.hpp
/// @brief Time integration of the perturbation equations in vorticity/streamfunction form.
///
/// Unknowns are rho (density perturbation), v (meridional velocity perturbation)
/// and omega = w_x - u_z. The streamfunction solves lap(psi) = omega at interior
/// levels with psi = 0 on both walls; u = -psi_z, w = psi_x. Wall vorticity is
/// omega = 0 at z = h and omega = -alpha*u at z = 0.
#pragma once

#include <functional>
#include <vector>

#include "bsnq/grid.hpp"
#include "bsnq/steady_states.hpp"

namespace bsnq {

enum class Mode { Nonlinear, Linearized };

struct State {
    double t = 0.0;
    ScalarField rho;
    ScalarField v;
    ScalarField omega;
    // Derived from omega by sync_derived.
    ScalarField psi;
    ScalarField u;
    ScalarField w;

    const Grid& grid() const { return rho.grid(); }
};

/// Recomputes psi, u, w from the interior vorticity and resets both wall rows of omega.
void sync_derived(State& s, const PhysicalParams& p);

/// State with the given rho, v and interior omega; wall vorticity and derived fields are filled in.
State make_state(ScalarField rho, ScalarField v, ScalarField omega, const PhysicalParams& p, double t = 0.0);

/// State whose velocity derives from psi0 (psi0 must vanish on the walls).
State state_from_psi(ScalarField rho, ScalarField v, const ScalarField& psi0, const PhysicalParams& p, double t = 0.0);

State zero_state(const Grid& grid);

struct Tendencies {
    ScalarField rho;
    ScalarField v;
    ScalarField omega;  ///< wall rows are zero (walls are constrained, not evolved)
};

struct TendencyOptions {
    bool include_diffusion = true;  ///< add nu*lap(omega)
    bool dealias = false;           ///< 2/3-rule on the advection terms (Nonlinear only)
};

/// Right-hand sides of the perturbation system. Nonlinear advection uses the
/// skew-symmetric split form; Linearized drops every quadratic term.
/// The state must be synchronized (see sync_derived).
Tendencies rhs_tendencies(const State& s, const SteadyState& ss, const PhysicalParams& p, Mode mode,
                          const TendencyOptions& options = {});

struct StepConfig {
    double dt = 1e-2;
    double cfl_target = 0.5;
    Mode mode = Mode::Nonlinear;
    bool dealias = true;
};

/// Advective CFL number dt * max(|u|,|w|) / min(dx, dz).
double cfl_number(const State& s, double dt);

/// One step: half-step implicit diffusion (two-stage L-stable SDIRK, slip vorticity solved
/// implicitly), SSP-RK3 for the explicit terms (boundary vorticity reset after each stage),
/// half-step implicit diffusion.
/// Throws CflViolation in Nonlinear mode when dt breaks cfl_target, NonFiniteField on NaN/Inf.
State step(const State& s, const SteadyState& ss, const PhysicalParams& p, const StepConfig& cfg);

/// Zero-mean pressure perturbation. Linearized mode drops (u.grad)u from the source.
ScalarField recover_pressure(const State& s, const SteadyState& ss, const PhysicalParams& p,
                             Mode mode = Mode::Nonlinear);

using Observer = std::function<void(const State&)>;

struct RunOptions {
    double T_end = 0.0;
    /// Observers fire at t = 0, after every `observe_every` steps and at T_end.
    int observe_every = 1;
    /// Shrink dt to the CFL bound in Nonlinear mode instead of failing.
    bool adaptive = true;
};

struct RunResult {
    State final_state;
    long steps = 0;
};

/// `step_observers` fire at t = 0 and after every step, before the cadence observers.
RunResult run(const State& s0, const SteadyState& ss, const PhysicalParams& p, const StepConfig& cfg,
              const RunOptions& options, const std::vector<Observer>& observers = {},
              const std::vector<Observer>& step_observers = {});

}  // namespace bsnq
