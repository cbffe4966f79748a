#include "bsnq/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "bsnq/error.hpp"
#include "bsnq/format.hpp"
#include "bsnq/operators.hpp"

namespace bsnq {

namespace {

const ScalarField& require_rho_s(const SteadyState& ss) {
    if (!ss.rho_s) throw InvalidArgument("steady state has no rho_s");
    return *ss.rho_s;
}

double trapezoid_step(double t0, double t1, double y0, double y1) { return 0.5 * (t1 - t0) * (y0 + y1); }

double squared(const ScalarField& f) { return inner(f, f); }

}  // namespace

ScalarField v_s_field(const SteadyState& ss, const Grid& grid) {
    return ScalarField::sample(grid, [&](double x, double) { return ss.a0 * x + ss.a1; });
}

ScalarField total_density(const State& s, const SteadyState& ss) {
    const ScalarField& rs = require_rho_s(ss);
    require_same_grid(s.grid(), rs.grid(), "total_density");
    return s.rho + rs;
}

double grad_velocity_sq(const State& s) {
    return squared(ddx(s.u)) + squared(ddz(s.u)) + squared(ddx(s.w)) + squared(ddz(s.w));
}

EnergyTerms energy_terms(const State& s, const SteadyState& ss, const PhysicalParams& p) {
    if (!(p.gamma > 0.0)) throw InvalidArgument("energy ledger needs gamma > 0");
    const Grid& g = s.grid();
    ScalarField theta = total_density(s, ss);
    theta.axpy(p.gamma, ss.psi);
    for (double& v : theta.values()) v -= p.beta;

    EnergyTerms e;
    e.theta_sq = squared(theta);
    e.v_sq = squared(s.v + v_s_field(ss, g));
    e.u_sq = squared(s.u) + squared(s.w);
    e.E = e.theta_sq + p.gamma * (e.v_sq + e.u_sq);
    e.D_visc = 2.0 * p.gamma * p.nu * grad_velocity_sq(s);
    e.D_bdry = 2.0 * p.gamma * p.nu * p.alpha * bottom_trace_l2sq(s.u);
    return e;
}

EnergyLedger::EnergyLedger(const SteadyState& ss, const PhysicalParams& p) : ss_(&ss), p_(p) {
    require_rho_s(ss);
    if (!(p.gamma > 0.0)) throw InvalidArgument("energy ledger needs gamma > 0");
}

void EnergyLedger::push(double t, const EnergyTerms& e) {
    if (!t_.empty()) dissipated_ += trapezoid_step(t_.back(), t, D_visc_.back() + D_bdry_.back(), e.D_visc + e.D_bdry);
    t_.push_back(t);
    E_.push_back(e.E);
    theta_sq_.push_back(e.theta_sq);
    D_visc_.push_back(e.D_visc);
    D_bdry_.push_back(e.D_bdry);
    residual_.push_back(e.E - E_.front() + dissipated_);
}

void EnergyLedger::update(const State& s) {
    if (!ss_) throw InvalidArgument("ledger was not bound to a steady state");
    push(s.t, energy_terms(s, *ss_, p_));
}

Observer EnergyLedger::observer() {
    return [this](const State& s) { update(s); };
}

EnergyLedger EnergyLedger::from_series(std::vector<double> t, std::vector<double> E, std::vector<double> D_visc,
                                       std::vector<double> D_bdry) {
    if (E.size() != t.size() || D_visc.size() != t.size() || D_bdry.size() != t.size())
        throw InvalidArgument("ledger series lengths differ");
    EnergyLedger l;
    for (std::size_t n = 0; n < t.size(); ++n) {
        EnergyTerms e;
        e.E = E[n];
        e.D_visc = D_visc[n];
        e.D_bdry = D_bdry[n];
        e.theta_sq = std::numeric_limits<double>::quiet_NaN();
        l.push(t[n], e);
    }
    return l;
}

double EnergyLedger::max_relative_residual() const {
    if (E_.empty()) return 0.0;
    double m = 0.0;
    for (double r : residual_) m = std::max(m, std::abs(r));
    return E_.front() > 0.0 ? m / E_.front() : m;
}

void EnergyLedger::write_csv(std::ostream& os) const {
    os << "t,E,theta_sq,D_visc,D_bdry,budget_residual\n";
    for (std::size_t n = 0; n < t_.size(); ++n)
        os << fmt_double(t_[n]) << ',' << fmt_double(E_[n]) << ',' << fmt_double(theta_sq_[n]) << ','
           << fmt_double(D_visc_[n]) << ',' << fmt_double(D_bdry_[n]) << ',' << fmt_double(residual_[n]) << '\n';
}

void EnergyLedger::write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    write_csv(os);
    if (!os) throw IoError("write failed: " + path.string());
}

EnergyLedger EnergyLedger::read_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw IoError(path.string() + ": empty ledger");
    std::map<std::string, std::size_t> col;
    {
        std::stringstream ss(line);
        std::string name;
        for (std::size_t c = 0; std::getline(ss, name, ','); ++c) col[name] = c;
    }
    for (const char* need : {"t", "E", "D_visc", "D_bdry"})
        if (!col.count(need)) throw IoError(path.string() + ": missing column " + need);
    std::vector<double> t, E, Dv, Db;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                vals.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (vals.size() != col.size())
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": wrong number of columns");
        t.push_back(vals[col["t"]]);
        E.push_back(vals[col["E"]]);
        Dv.push_back(vals[col["D_visc"]]);
        Db.push_back(vals[col["D_bdry"]]);
    }
    return from_series(std::move(t), std::move(E), std::move(Dv), std::move(Db));
}

double relative_drift(const std::vector<double>& series) {
    if (series.empty()) return 0.0;
    const double n0 = series.front();
    double m = 0.0;
    for (double v : series) m = std::max(m, std::abs(v - n0));
    return n0 != 0.0 ? m / std::abs(n0) : m;
}

double density_norm(const State& s, const SteadyState& ss, double q) { return norm_lq(total_density(s, ss), q); }

ConservedNormTracker::ConservedNormTracker(const SteadyState& ss, int q) : ss_(&ss), q_(q) {
    if (q < 1) throw InvalidArgument("norm exponent q must be >= 1");
    require_rho_s(ss);
}

void ConservedNormTracker::update(const State& s) {
    t_.push_back(s.t);
    n_.push_back(density_norm(s, *ss_, q_));
}

Observer ConservedNormTracker::observer() {
    return [this](const State& s) { update(s); };
}

NormDrift ConservedNormTracker::drift() const { return {relative_drift(n_), q_ % 2 == 0}; }

double velocity_w1s_norm(const State& s, double sexp) {
    if (!(sexp >= 1.0)) throw InvalidArgument("W^{1,s} needs s >= 1");
    const Grid& g = s.grid();
    const ScalarField ux = ddx(s.u), uz = ddz(s.u), wx = ddx(s.w), wz = ddz(s.w);
    ScalarField integrand(g);
    for (std::size_t n = 0; n < g.size(); ++n) {
        const double a = std::hypot(s.u.values()[n], s.w.values()[n]);
        const double gr = std::sqrt(ux.values()[n] * ux.values()[n] + uz.values()[n] * uz.values()[n] +
                                    wx.values()[n] * wx.values()[n] + wz.values()[n] * wz.values()[n]);
        integrand.values()[n] = std::pow(a, sexp) + std::pow(gr, sexp);
    }
    return std::pow(integrate(integrand), 1.0 / sexp);
}

double balance_residual_proxy(const State& s, const SteadyState& ss, const PhysicalParams& p, Mode mode) {
    const ScalarField pr = recover_pressure(s, ss, p, mode);
    ScalarField rx = p.f * s.v - ddx(pr) - hadamard(s.rho, ss.grad_psi.x);
    ScalarField rz = ddz(pr);
    rz *= -1.0;
    rz -= hadamard(s.rho, ss.grad_psi.z);
    double acc = 0.0;
    for (ScalarField* r : {&rx, &rz}) {
        const ScalarField G = poisson_dirichlet(*r);
        acc += -inner(G, *r);
    }
    return std::sqrt(std::max(acc, 0.0));
}

double fit_objective(const ScalarField& rho_total, const ScalarField& v_total, const ScalarField& psi, double gamma,
                     double beta) {
    ScalarField r = rho_total;
    r.axpy(gamma, psi);
    for (double& v : r.values()) v -= beta;
    return squared(r) + gamma * squared(v_total);
}

double lambda0_bound(const ScalarField& R, const ScalarField& psi) {
    const double psi0 = *std::max_element(psi.values().begin(), psi.values().end());
    auto G = [&](double gamma, double beta) {
        ScalarField r = R;
        r.axpy(gamma, psi);
        for (double& v : r.values()) v -= beta;
        return squared(r);
    };
    const double mR = mean(R), mP = mean(psi);
    ScalarField Rt = R, Pt = psi;
    for (double& v : Rt.values()) v -= mR;
    for (double& v : Pt.values()) v -= mP;
    const double a = squared(Pt);

    double best = std::numeric_limits<double>::infinity();
    if (a > 0.0) {
        const double gu = -inner(Rt, Pt) / a;
        const double bu = mR + gu * mP;
        if (gu >= 0.0 && bu >= gu * psi0) best = std::min(best, G(gu, bu));
    }
    best = std::min(best, G(0.0, std::max(0.0, mR)));
    ScalarField d = psi;
    for (double& v : d.values()) v -= psi0;
    const double dd = squared(d);
    const double ge = dd > 0.0 ? std::max(0.0, -inner(R, d) / dd) : 0.0;
    best = std::min(best, G(ge, ge * psi0));
    return best;
}

GammaBetaFit fit_gamma_beta(const State& terminal, const State& initial, const SteadyState& ss, double dissipation) {
    const Grid& g = terminal.grid();
    const ScalarField vs = v_s_field(ss, g);
    const ScalarField R = total_density(terminal, ss);
    const ScalarField V = terminal.v + vs;
    const ScalarField& psi = ss.psi;

    GammaBetaFit fit;
    const double mR = mean(R), mP = mean(psi);
    ScalarField Rt = R, Pt = psi;
    for (double& v : Rt.values()) v -= mR;
    for (double& v : Pt.values()) v -= mP;
    const double a = squared(Pt), b = inner(Rt, Pt), c = squared(V);
    const double scale = std::max(1.0, squared(R));
    fit.degenerate = !(a > 1e-14 * g.area() * std::max(1.0, mP * mP));
    double gamma = 0.0;
    if (!fit.degenerate) gamma = -(2.0 * b + c) / (2.0 * a);
    if (fit.degenerate || gamma <= 0.0) {
        fit.gamma_at_boundary = true;
        gamma = 0.0;
    }
    fit.gamma = gamma;
    fit.beta = mR + gamma * mP;
    fit.C0 = fit_objective(R, V, psi, fit.gamma, fit.beta);

    fit.locally_optimal = true;
    const double dg = 0.01 * fit.gamma;
    const double db = 0.01 * (fit.beta != 0.0 ? std::abs(fit.beta) : 1.0);
    for (int i = -1; i <= 1; ++i)
        for (int j = -1; j <= 1; ++j) {
            if (i == 0 && j == 0) continue;
            const double gg = fit.gamma + i * dg;
            if (gg < 0.0) continue;
            if (fit_objective(R, V, psi, gg, fit.beta + j * db) < fit.C0 - 1e-12 * scale) fit.locally_optimal = false;
        }

    const ScalarField R0 = total_density(initial, ss);
    const double u0 = squared(initial.u) + squared(initial.w);
    const double v0 = squared(initial.v + vs);
    fit.dissipation = dissipation;
    fit.Lambda0 = lambda0_bound(R0, psi);
    fit.sufficient_rhs = u0 + v0 + fit.Lambda0;
    fit.sufficient_condition = dissipation >= fit.sufficient_rhs;
    if (fit.gamma > 0.0) {
        ScalarField th = R0;
        th.axpy(fit.gamma, psi);
        for (double& v : th.values()) v -= fit.beta;
        fit.budget_rhs = u0 + v0 + squared(th) / fit.gamma;
    } else {
        fit.budget_rhs = std::numeric_limits<double>::infinity();
    }
    return fit;
}

DecayRecorder::DecayRecorder(const SteadyState& ss, const PhysicalParams& p, Options options)
    : ss_(&ss), p_(p), options_(std::move(options)), w1s_(options_.w1s_exponents.size()) {
    for (double e : options_.w1s_exponents)
        if (!(e >= 1.0)) throw InvalidArgument("W^{1,s} exponents must be >= 1");
}

void DecayRecorder::update(const State& s) {
    t_.push_back(s.t);
    u_l2_.push_back(std::sqrt(squared(s.u) + squared(s.w)));
    h1_.push_back(velocity_h1_norm(s));
    for (std::size_t k = 0; k < options_.w1s_exponents.size(); ++k)
        w1s_[k].push_back(velocity_w1s_norm(s, options_.w1s_exponents[k]));
    if (options_.balance_proxy) proxy_.push_back(balance_residual_proxy(s, *ss_, p_, options_.mode));
    us_.push_back(s.u);
    ws_.push_back(s.w);
}

Observer DecayRecorder::observer() {
    return [this](const State& s) { update(s); };
}

std::vector<double> DecayRecorder::ut_l2() const {
    const std::size_t n = t_.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    auto combo = [&](std::size_t i0, double c0, std::size_t i1, double c1, std::size_t i2, double c2) {
        ScalarField du = c0 * us_[i0] + c1 * us_[i1];
        ScalarField dw = c0 * ws_[i0] + c1 * ws_[i1];
        if (c2 != 0.0) {
            du.axpy(c2, us_[i2]);
            dw.axpy(c2, ws_[i2]);
        }
        return std::sqrt(squared(du) + squared(dw));
    };
    if (n == 2) {
        const double h = t_[1] - t_[0];
        out[0] = out[1] = combo(0, -1.0 / h, 1, 1.0 / h, 0, 0.0);
        return out;
    }
    for (std::size_t k = 0; k < n; ++k) {
        // Three-point stencil on (k-1, k, k+1), shifted at the ends; derivative taken at t_k.
        const std::size_t m = std::clamp<std::size_t>(k, 1, n - 2);
        const double t0 = t_[m - 1], t1 = t_[m], t2 = t_[m + 1], t = t_[k];
        // Derivatives of the Lagrange basis polynomials at t.
        const double l0 = ((t - t1) + (t - t2)) / ((t0 - t1) * (t0 - t2));
        const double l1 = ((t - t0) + (t - t2)) / ((t1 - t0) * (t1 - t2));
        const double l2 = ((t - t0) + (t - t1)) / ((t2 - t0) * (t2 - t1));
        out[k] = combo(m - 1, l0, m, l1, m + 1, l2);
    }
    return out;
}

DecayReport decay_report(const DecayRecorder& rec, const GammaBetaFit& fit) {
    DecayReport r;
    r.times = rec.times();
    r.u_l2 = rec.u_l2();
    r.h1 = rec.h1();
    r.w1s_exponents = rec.options().w1s_exponents;
    r.w1s = rec.w1s();
    r.ut_l2 = rec.ut_l2();
    r.balance_proxy = rec.proxy();
    r.fit = fit;
    r.C0_estimate = fit.C0;
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    r.all_finite = finite(r.u_l2) && finite(r.h1) && finite(r.ut_l2) && finite(r.balance_proxy) &&
                   std::isfinite(fit.C0) && std::isfinite(fit.gamma) && std::isfinite(fit.beta);
    for (const auto& s : r.w1s) r.all_finite = r.all_finite && finite(s);
    return r;
}

void DecayReport::write_csv(std::ostream& os) const {
    os << "t,u_l2,h1";
    for (double e : w1s_exponents) os << ",w1s_" << fmt_double(e);
    os << ",ut_l2";
    if (!balance_proxy.empty()) os << ",balance_proxy";
    os << '\n';
    for (std::size_t n = 0; n < times.size(); ++n) {
        os << fmt_double(times[n]) << ',' << fmt_double(u_l2[n]) << ',' << fmt_double(h1[n]);
        for (const auto& s : w1s) os << ',' << fmt_double(s[n]);
        os << ',' << fmt_double(ut_l2[n]);
        if (!balance_proxy.empty()) os << ',' << fmt_double(balance_proxy[n]);
        os << '\n';
    }
}

void DecayReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    write_csv(os);
    if (!os) throw IoError("write failed: " + path.string());
}

double first_drop_below_running_max(const std::vector<double>& t, const std::vector<double>& y, double fraction) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < y.size(); ++n) {
        m = std::max(m, y[n]);
        if (y[n] < fraction * m) return t[n];
    }
    return -1.0;
}

bool non_increasing_after(const std::vector<double>& t, const std::vector<double>& y, double t_from,
                          double rel_slack) {
    for (std::size_t n = 0; n + 1 < y.size(); ++n)
        if (t[n] >= t_from && y[n + 1] > y[n] * (1.0 + rel_slack)) return false;
    return true;
}

}  // namespace bsnq
