/// @file diagnostics.hpp
/// @brief Run observers: energy ledger, conserved norms, decay series and the (gamma, beta) fit.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "bsnq/dynamics.hpp"
#include "bsnq/grid.hpp"
#include "bsnq/steady_states.hpp"

namespace bsnq {

/// v_s = a0 x + a1 sampled at the nodes.
ScalarField v_s_field(const SteadyState& ss, const Grid& grid);

/// rho + rho_s (requires ss.rho_s).
ScalarField total_density(const State& s, const SteadyState& ss);

/// integral |grad u|^2 over the four velocity-gradient components (trapezoid in z).
double grad_velocity_sq(const State& s);

/// One ledger row.
struct EnergyTerms {
    double theta_sq = 0.0;  ///< ||rho + rho_s + gamma Psi - beta||^2
    double v_sq = 0.0;      ///< ||v + v_s||^2
    double u_sq = 0.0;      ///< ||u||^2 + ||w||^2
    double E = 0.0;         ///< theta_sq + gamma (v_sq + u_sq)
    double D_visc = 0.0;    ///< 2 gamma nu ||grad u||^2
    double D_bdry = 0.0;    ///< 2 gamma nu alpha integral u(x, 0)^2
};

EnergyTerms energy_terms(const State& s, const SteadyState& ss, const PhysicalParams& p);

/// Time series of the Lyapunov energy and its dissipation, with the running budget
/// residual E(t) - E(0) + integral_0^t (D_visc + D_bdry) (trapezoid in time).
class EnergyLedger {
public:
    EnergyLedger() = default;
    EnergyLedger(const SteadyState& ss, const PhysicalParams& p);

    void update(const State& s);
    Observer observer();

    /// Rebuilds the residual column from (t, E, D_visc, D_bdry) rows.
    static EnergyLedger from_series(std::vector<double> t, std::vector<double> E, std::vector<double> D_visc,
                                    std::vector<double> D_bdry);

    std::size_t size() const { return t_.size(); }
    const std::vector<double>& times() const { return t_; }
    const std::vector<double>& E() const { return E_; }
    const std::vector<double>& theta_sq() const { return theta_sq_; }
    const std::vector<double>& D_visc() const { return D_visc_; }
    const std::vector<double>& D_bdry() const { return D_bdry_; }
    const std::vector<double>& budget_residual() const { return residual_; }
    /// integral_0^t (D_visc + D_bdry) at the last row.
    double dissipated() const { return dissipated_; }
    /// max_t |budget_residual| / E(0).
    double max_relative_residual() const;

    void write_csv(std::ostream& os) const;
    void write_csv(const std::filesystem::path& path) const;
    /// Reads t, E, D_visc, D_bdry from a ledger CSV and recomputes the residual.
    static EnergyLedger read_csv(const std::filesystem::path& path);

private:
    void push(double t, const EnergyTerms& e);

    const SteadyState* ss_ = nullptr;
    PhysicalParams p_;
    std::vector<double> t_, E_, theta_sq_, D_visc_, D_bdry_, residual_;
    double dissipated_ = 0.0;
};

struct NormDrift {
    double drift = 0.0;
    /// Exact conservation is only claimed for even q.
    bool even_q = true;
};

/// max_t |n(t) - n(0)| / n(0) over a series of norms.
double relative_drift(const std::vector<double>& series);

/// ||rho + rho_s||_q
double density_norm(const State& s, const SteadyState& ss, double q);

/// Observer-side tracker of ||rho + rho_s||_q.
class ConservedNormTracker {
public:
    ConservedNormTracker(const SteadyState& ss, int q);
    void update(const State& s);
    Observer observer();
    int q() const { return q_; }
    const std::vector<double>& times() const { return t_; }
    const std::vector<double>& norms() const { return n_; }
    NormDrift drift() const;

private:
    const SteadyState* ss_;
    int q_;
    std::vector<double> t_, n_;
};

/// (||u||_s^s + ||grad u||_s^s)^(1/s) with pointwise Euclidean/Frobenius magnitudes.
double velocity_w1s_norm(const State& s, double sexp);
inline double velocity_h1_norm(const State& s) { return velocity_w1s_norm(s, 2.0); }

/// Discrete H^-1 size of f v e1 - grad p - rho grad Psi: sqrt(-<G, r>) per component with
/// lap G = r and G = 0 on the walls.
double balance_residual_proxy(const State& s, const SteadyState& ss, const PhysicalParams& p,
                              Mode mode = Mode::Nonlinear);

struct GammaBetaFit {
    double gamma = 0.0;
    double beta = 0.0;
    double C0 = 0.0;  ///< F(gamma, beta) on the terminal fields
    bool degenerate = false;        ///< Psi is constant on the grid
    bool gamma_at_boundary = false; ///< unconstrained optimum has gamma <= 0
    bool locally_optimal = false;   ///< +-1% perturbations never decrease F
    double Lambda0 = 0.0;           ///< min over gamma >= 0, beta >= gamma max(Psi) on the initial density
    double dissipation = 0.0;       ///< 2 nu integral (||grad u||^2 + alpha integral u(x,0)^2) dt
    double budget_rhs = 0.0;        ///< ||u0||^2 + ||v0 + v_s||^2 + ||rho0 + rho_s + gamma Psi - beta||^2 / gamma
    double sufficient_rhs = 0.0;    ///< ||u0||^2 + ||v0 + v_s||^2 + Lambda0
    bool sufficient_condition = false;  ///< dissipation >= sufficient_rhs
};

/// F(gamma, beta) = ||rho + rho_s + gamma Psi - beta||^2 + gamma ||v + v_s||^2.
double fit_objective(const ScalarField& rho_total, const ScalarField& v_total, const ScalarField& psi, double gamma,
                     double beta);

/// Exact minimizer of F (beta is the area mean, F is quadratic in gamma).
/// `dissipation` is the time integral from the run (ledger dissipated() / gamma_run).
GammaBetaFit fit_gamma_beta(const State& terminal, const State& initial, const SteadyState& ss, double dissipation);

/// min over gamma >= 0, beta >= gamma max(Psi) of ||rho_total + gamma Psi - beta||^2.
double lambda0_bound(const ScalarField& rho_total, const ScalarField& psi);

/// Samples of the decay series taken by a run observer.
class DecayRecorder {
public:
    struct Options {
        std::vector<double> w1s_exponents{4.0};
        bool balance_proxy = false;
        Mode mode = Mode::Nonlinear;
    };
    DecayRecorder(const SteadyState& ss, const PhysicalParams& p, Options options);
    void update(const State& s);
    Observer observer();

    const Options& options() const { return options_; }
    const std::vector<double>& times() const { return t_; }
    const std::vector<double>& u_l2() const { return u_l2_; }
    const std::vector<double>& h1() const { return h1_; }
    const std::vector<std::vector<double>>& w1s() const { return w1s_; }
    const std::vector<double>& proxy() const { return proxy_; }
    /// ||u_t|| from the saved velocity snapshots: centered (non-uniform three-point)
    /// inside, one-sided at both ends.
    std::vector<double> ut_l2() const;

private:
    const SteadyState* ss_;
    PhysicalParams p_;
    Options options_;
    std::vector<double> t_, u_l2_, h1_, proxy_;
    std::vector<std::vector<double>> w1s_;
    std::vector<ScalarField> us_, ws_;
};

struct DecayReport {
    std::vector<double> times;
    std::vector<double> u_l2;
    std::vector<double> h1;
    std::vector<double> w1s_exponents;
    std::vector<std::vector<double>> w1s;
    std::vector<double> ut_l2;
    std::vector<double> balance_proxy;  ///< empty unless recorded
    GammaBetaFit fit;
    double C0_estimate = 0.0;
    bool all_finite = true;

    void write_csv(std::ostream& os) const;
    void write_csv(const std::filesystem::path& path) const;
};

DecayReport decay_report(const DecayRecorder& recorder, const GammaBetaFit& fit);

/// First time at which the series falls below `fraction` of its running maximum; negative if never.
double first_drop_below_running_max(const std::vector<double>& t, const std::vector<double>& y, double fraction);

/// True if y is non-increasing for every sample with t >= t_from (up to a relative slack).
bool non_increasing_after(const std::vector<double>& t, const std::vector<double>& y, double t_from,
                          double rel_slack = 0.0);

}  // namespace bsnq
