#include "bsnq/dynamics.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "bsnq/error.hpp"
#include "bsnq/operators.hpp"

namespace bsnq {

namespace {

// 1/2 [u q_x + (u q)_x + w D q + D(w q)] with the summation-by-parts z-derivative.
ScalarField advect(const ScalarField& u, const ScalarField& w, const ScalarField& q) {
    ScalarField out = hadamard(u, ddx(q));
    out += ddx(hadamard(u, q));
    out += hadamard(w, ddz_sbp(q));
    out += ddz_sbp(hadamard(w, q));
    out *= 0.5;
    return out;
}

void zero_walls(ScalarField& f) {
    const Grid& g = f.grid();
    for (int i = 0; i < g.Nx; ++i) f(i, 0) = f(i, g.Nz - 1) = 0.0;
}

void check_finite(const State& s, const char* where) {
    for (const auto* f : {&s.rho, &s.v, &s.omega, &s.u, &s.w}) {
        if (!f->all_finite()) {
            spdlog::error("{}: non-finite field at t = {:.6g} (max|rho| {:.3e}, max|v| {:.3e}, max|omega| {:.3e})", where,
                          s.t, s.rho.max_abs(), s.v.max_abs(), s.omega.max_abs());
            throw NonFiniteField(std::string(where) + ": NaN/Inf in state at t = " + std::to_string(s.t));
        }
    }
}

// omega_t = nu lap(omega) over tau by the two-stage L-stable SDIRK scheme. Crank-Nicolson
// leaves the stiff near-wall modes undamped (amplification -> -1), which the explicit stage
// then feeds. The wall vorticity is part of each implicit solve.
void diffuse(State& s, double nu, double alpha, double tau) {
    constexpr double g = 1.0 - 0.70710678118654752440;
    const ScalarField y1 = solve_helmholtz_slip(s.omega, g * nu * tau, alpha);
    ScalarField rhs = s.omega;
    rhs.axpy((1.0 - g) / g, y1 - s.omega);
    s.omega = solve_helmholtz_slip(rhs, g * nu * tau, alpha);
}

// y <- a*y + b*(x + dt*k) on the evolved fields.
void combine(State& y, double a, const State& x, double b, const Tendencies& k, double dt) {
    auto upd = [&](ScalarField& yf, const ScalarField& xf, const ScalarField& kf) {
        auto yv = yf.values();
        auto xv = xf.values();
        auto kv = kf.values();
        for (std::size_t n = 0; n < yv.size(); ++n) yv[n] = a * yv[n] + b * (xv[n] + dt * kv[n]);
    };
    upd(y.rho, x.rho, k.rho);
    upd(y.v, x.v, k.v);
    upd(y.omega, x.omega, k.omega);
}

}  // namespace

void sync_derived(State& s, const PhysicalParams& p) {
    const Grid& g = s.rho.grid();
    require_same_grid(g, s.v.grid(), "sync_derived");
    require_same_grid(g, s.omega.grid(), "sync_derived");
    s.psi = poisson_dirichlet(s.omega);
    Velocity vel = velocity_from_psi(s.psi);
    s.u = std::move(vel.u);
    s.w = std::move(vel.w);
    for (int i = 0; i < g.Nx; ++i) {
        s.omega(i, 0) = -p.alpha * s.u(i, 0);
        s.omega(i, g.Nz - 1) = 0.0;
    }
}

State make_state(ScalarField rho, ScalarField v, ScalarField omega, const PhysicalParams& p, double t) {
    State s;
    s.t = t;
    s.rho = std::move(rho);
    s.v = std::move(v);
    s.omega = std::move(omega);
    sync_derived(s, p);
    check_finite(s, "make_state");
    return s;
}

State state_from_psi(ScalarField rho, ScalarField v, const ScalarField& psi0, const PhysicalParams& p, double t) {
    return make_state(std::move(rho), std::move(v), laplacian(psi0), p, t);
}

State zero_state(const Grid& grid) {
    State s;
    s.rho = s.v = s.omega = s.psi = s.u = s.w = ScalarField(grid);
    return s;
}

Tendencies rhs_tendencies(const State& s, const SteadyState& ss, const PhysicalParams& p, Mode mode,
                          const TendencyOptions& options) {
    const Grid& g = s.grid();
    require_same_grid(g, ss.psi.grid(), "rhs_tendencies");
    const ScalarField& Px = ss.grad_psi.x;
    const ScalarField& Pz = ss.grad_psi.z;
    const ScalarField& delta = ss.delta_values;

    Tendencies k{ScalarField(g), ScalarField(g), ScalarField(g)};
    const ScalarField rx = ddx(s.rho);
    const ScalarField rz = ddz(s.rho);
    const ScalarField vz = ddz(s.v);
    const double coriolis = p.f + p.alpha0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        const double u = s.u.values()[n], w = s.w.values()[n];
        const double px = Px.values()[n], pz = Pz.values()[n];
        k.rho.values()[n] = -delta.values()[n] * (u * px + w * pz);
        k.v.values()[n] = -coriolis * u;
        k.omega.values()[n] = -rx.values()[n] * pz + rz.values()[n] * px - p.f * vz.values()[n];
    }
    if (options.include_diffusion) k.omega.axpy(p.nu, laplacian(s.omega));

    if (mode == Mode::Nonlinear) {
        ScalarField ar = advect(s.u, s.w, s.rho);
        ScalarField av = advect(s.u, s.w, s.v);
        ScalarField aw = advect(s.u, s.w, s.omega);
        if (options.dealias) {
            ar = dealias_23(ar);
            av = dealias_23(av);
            aw = dealias_23(aw);
        }
        k.rho -= ar;
        k.v -= av;
        k.omega -= aw;
    }
    zero_walls(k.omega);
    k.rho.ensure_finite("rhs_tendencies(rho)");
    k.v.ensure_finite("rhs_tendencies(v)");
    k.omega.ensure_finite("rhs_tendencies(omega)");
    return k;
}

double cfl_number(const State& s, double dt) {
    const Grid& g = s.grid();
    const double umax = std::max(s.u.max_abs(), s.w.max_abs());
    return dt * umax / std::min(g.dx(), g.dz());
}

State step(const State& s, const SteadyState& ss, const PhysicalParams& p, const StepConfig& cfg) {
    if (!(cfg.dt > 0.0)) throw InvalidArgument("dt must be positive");
    if (!(cfg.cfl_target > 0.0 && cfg.cfl_target <= 1.0)) throw InvalidArgument("cfl_target must lie in (0, 1]");
    if (cfg.mode == Mode::Nonlinear) {
        const double c = cfl_number(s, cfg.dt);
        if (c > cfg.cfl_target * (1.0 + 1e-12)) throw CflViolation(c, cfg.cfl_target);
    }
    const double dt = cfg.dt;
    TendencyOptions topt;
    topt.include_diffusion = false;
    topt.dealias = cfg.dealias && cfg.mode == Mode::Nonlinear;

    State y = s;
    diffuse(y, p.nu, p.alpha, 0.5 * dt);
    sync_derived(y, p);

    // SSP-RK3 (Shu-Osher form).
    const State y0 = y;
    State y1 = y0;
    combine(y1, 0.0, y0, 1.0, rhs_tendencies(y0, ss, p, cfg.mode, topt), dt);
    sync_derived(y1, p);
    State y2 = y0;
    combine(y2, 0.75, y1, 0.25, rhs_tendencies(y1, ss, p, cfg.mode, topt), dt);
    sync_derived(y2, p);
    State y3 = y0;
    combine(y3, 1.0 / 3.0, y2, 2.0 / 3.0, rhs_tendencies(y2, ss, p, cfg.mode, topt), dt);
    sync_derived(y3, p);

    diffuse(y3, p.nu, p.alpha, 0.5 * dt);
    sync_derived(y3, p);
    y3.t = s.t + dt;
    check_finite(y3, "step");
    return y3;
}

ScalarField recover_pressure(const State& s, const SteadyState& ss, const PhysicalParams& p, Mode mode) {
    const Grid& g = s.grid();
    const ScalarField& Px = ss.grad_psi.x;
    const ScalarField& Pz = ss.grad_psi.z;
    // F = rho grad(Psi) + (u.grad)u - f v e1; lap p = -div F.
    ScalarField Fx = hadamard(s.rho, Px);
    ScalarField Fz = hadamard(s.rho, Pz);
    Fx.axpy(-p.f, s.v);
    if (mode == Mode::Nonlinear) {
        Fx += hadamard(s.u, ddx(s.u)) + hadamard(s.w, ddz(s.u));
        Fz += hadamard(s.u, ddx(s.w)) + hadamard(s.w, ddz(s.w));
    }
    ScalarField rhs = ddx(Fx) + ddz(Fz);
    rhs *= -1.0;

    BoundaryPair flux = BoundaryPair::zeros(g);
    const ScalarField ux = ddx(s.u);
    const int N = g.Nz - 1;
    for (int i = 0; i < g.Nx; ++i) {
        flux.bottom[i] = -s.rho(i, 0) * Pz(i, 0) - p.nu * p.alpha * ux(i, 0);
        flux.top[i] = -s.rho(i, N) * Pz(i, N);
    }
    return poisson_neumann(rhs, flux);
}

RunResult run(const State& s0, const SteadyState& ss, const PhysicalParams& p, const StepConfig& cfg,
              const RunOptions& options, const std::vector<Observer>& observers,
              const std::vector<Observer>& step_observers) {
    if (options.T_end < s0.t) throw InvalidArgument("T_end precedes the initial time");
    if (options.observe_every < 1) throw InvalidArgument("observe_every must be >= 1");
    RunResult r{s0, 0};
    auto notify = [&] {
        for (const auto& obs : observers) obs(r.final_state);
    };
    for (const auto& obs : step_observers) obs(r.final_state);
    notify();
    const double eps = 1e-12 * std::max(1.0, options.T_end);
    bool observed_last = true;
    while (r.final_state.t < options.T_end - eps) {
        StepConfig c = cfg;
        if (options.adaptive && cfg.mode == Mode::Nonlinear) {
            const Grid& g = r.final_state.grid();
            const double umax = std::max(r.final_state.u.max_abs(), r.final_state.w.max_abs());
            if (umax > 0.0) c.dt = std::min(c.dt, cfg.cfl_target * std::min(g.dx(), g.dz()) / umax);
        }
        c.dt = std::min(c.dt, options.T_end - r.final_state.t);
        const double t_target = r.final_state.t + c.dt;
        r.final_state = step(r.final_state, ss, p, c);
        if (options.T_end - t_target <= eps) r.final_state.t = options.T_end;
        ++r.steps;
        for (const auto& obs : step_observers) obs(r.final_state);
        observed_last = (r.steps % options.observe_every == 0);
        if (observed_last) notify();
    }
    if (!observed_last) notify();
    return r;
}

}  // namespace bsnq
