#include "bsnq/stability.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "bsnq/error.hpp"
#include "bsnq/operators.hpp"

namespace bsnq {

namespace {

using Triplet = Eigen::Triplet<double>;

// First column of the spectral x-derivative matrices (circulant), with exact
// (anti)symmetry enforced so the assembled forms are symmetric to rounding.
std::vector<double> circulant_column(const Grid& grid, int order) {
    Grid g1 = grid;
    g1.Nz = 3;
    ScalarField e(g1);
    e(0, 0) = 1.0;
    const ScalarField d = order == 1 ? ddx(e) : d2dx2(e);
    const int N = grid.Nx;
    std::vector<double> c(N);
    for (int m = 0; m < N; ++m) c[m] = d(m, 0);
    std::vector<double> out(N);
    for (int m = 0; m < N; ++m) {
        const double other = c[(N - m) % N];
        out[m] = order == 1 ? 0.5 * (c[m] - other) : 0.5 * (c[m] + other);
    }
    return out;
}

struct DofOperators {
    SparseMatrix U;    // nodes <- psi: u = -psi_z (one-sided at the walls)
    SparseMatrix W;    // nodes <- psi: w = psi_x
    SparseMatrix Lap;  // interior <- psi: lap_d psi
    SparseMatrix U0;   // bottom wall nodes <- psi: u(x, 0)
};

DofOperators build_operators(const Grid& g) {
    const int Nx = g.Nx, Nz = g.Nz, N = Nz - 1, ni = Nz - 2;
    const int nfull = Nx * Nz, nint = Nx * ni;
    auto dof = [&](int i, int j) { return i * ni + (j - 1); };  // j in [1, N-1]
    auto node = [&](int i, int j) { return i * Nz + j; };
    const double dz = g.dz();
    const auto c1 = circulant_column(g, 1);
    const auto c2 = circulant_column(g, 2);

    std::vector<Triplet> tu, tw, tl, t0;
    for (int i = 0; i < Nx; ++i) {
        // u = -psi_z: interior centered, walls one-sided with psi = 0 on the wall itself.
        for (int j = 1; j < N; ++j) {
            if (j + 1 < N) tu.emplace_back(node(i, j), dof(i, j + 1), -0.5 / dz);
            if (j - 1 > 0) tu.emplace_back(node(i, j), dof(i, j - 1), 0.5 / dz);
        }
        tu.emplace_back(node(i, 0), dof(i, 1), -2.0 / dz);
        tu.emplace_back(node(i, 0), dof(i, 2), 0.5 / dz);
        tu.emplace_back(node(i, N), dof(i, N - 1), -2.0 / dz);
        tu.emplace_back(node(i, N), dof(i, N - 2), 0.5 / dz);
        t0.emplace_back(i, dof(i, 1), -2.0 / dz);
        t0.emplace_back(i, dof(i, 2), 0.5 / dz);

        for (int j = 1; j < N; ++j) {
            for (int l = 0; l < Nx; ++l) {
                const int m = ((i - l) % Nx + Nx) % Nx;
                if (c1[m] != 0.0) tw.emplace_back(node(i, j), dof(l, j), c1[m]);
                double v = c2[m];
                if (l == i) v -= 2.0 / (dz * dz);
                tl.emplace_back(dof(i, j), dof(l, j), v);
            }
            if (j + 1 < N) tl.emplace_back(dof(i, j), dof(i, j + 1), 1.0 / (dz * dz));
            if (j - 1 > 0) tl.emplace_back(dof(i, j), dof(i, j - 1), 1.0 / (dz * dz));
        }
    }
    DofOperators ops;
    ops.U.resize(nfull, nint);
    ops.U.setFromTriplets(tu.begin(), tu.end());
    ops.W.resize(nfull, nint);
    ops.W.setFromTriplets(tw.begin(), tw.end());
    ops.Lap.resize(nint, nint);
    ops.Lap.setFromTriplets(tl.begin(), tl.end());
    ops.U0.resize(Nx, nint);
    ops.U0.setFromTriplets(t0.begin(), t0.end());
    return ops;
}

SparseMatrix diag(const Eigen::VectorXd& d) {
    SparseMatrix m(d.size(), d.size());
    std::vector<Triplet> t;
    t.reserve(d.size());
    for (Eigen::Index n = 0; n < d.size(); ++n) t.emplace_back(n, n, d[n]);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

Eigen::VectorXd nodal(const ScalarField& f) {
    return Eigen::Map<const Eigen::VectorXd>(f.values().data(), static_cast<Eigen::Index>(f.size()));
}

double norm1(const SparseMatrix& A) {
    double m = 0.0;
    for (int k = 0; k < A.outerSize(); ++k) {
        double c = 0.0;
        for (SparseMatrix::InnerIterator it(A, k); it; ++it) c += std::abs(it.value());
        m = std::max(m, c);
    }
    return m;
}

// Normwise backward error ||M x - mu B x|| / ((||M||_1 + |mu| ||B||_1) ||x||).
double relative_residual(const SparseMatrix& M, const SparseMatrix& B, const Eigen::VectorXd& x, double mu) {
    const double denom = (norm1(M) + std::abs(mu) * norm1(B)) * x.norm();
    return denom > 0.0 ? (M * x - mu * (B * x)).norm() / denom : 0.0;
}

// Number of eigenvalues of (K) below zero via the LDL^T inertia; -1 if the factorization failed.
long negative_pivots(const Eigen::SimplicialLDLT<SparseMatrix>& f) {
    if (f.info() != Eigen::Success) return -1;
    const Eigen::VectorXd d = f.vectorD();
    return static_cast<long>((d.array() < 0.0).count());
}

}  // namespace

ScalarField QuadraticForms::to_field(const Eigen::VectorXd& x) const {
    ScalarField f(grid);
    const int ni = grid.Nz - 2;
    for (int i = 0; i < grid.Nx; ++i)
        for (int j = 1; j < grid.Nz - 1; ++j) f(i, j) = x[i * ni + (j - 1)];
    return f;
}

Eigen::VectorXd QuadraticForms::from_field(const ScalarField& psi) const {
    const int ni = grid.Nz - 2;
    Eigen::VectorXd x(grid.Nx * ni);
    for (int i = 0; i < grid.Nx; ++i)
        for (int j = 1; j < grid.Nz - 1; ++j) x[i * ni + (j - 1)] = psi(i, j);
    return x;
}

QuadraticForms assemble_forms(const SteadyState& ss, const PhysicalParams& p, const Grid& g) {
    require_same_grid(ss.psi.grid(), g, "assemble_forms");
    const DofOperators ops = build_operators(g);
    const double dx = g.dx(), dz = g.dz();

    Eigen::VectorXd wts(g.size());
    for (int i = 0; i < g.Nx; ++i)
        for (int j = 0; j < g.Nz; ++j) wts[g.index(i, j)] = dx * g.z_weight(j);

    QuadraticForms q;
    q.grid = g;
    q.nu = p.nu;
    q.B = -(dx * dz) * ops.Lap;
    q.A1 = (dx * dz) * SparseMatrix(ops.Lap.transpose() * ops.Lap) +
           (dx * (p.alpha + 0.5 * dz * p.alpha * p.alpha)) * SparseMatrix(ops.U0.transpose() * ops.U0);

    const Eigen::VectorXd px = nodal(ss.grad_psi.x), pz = nodal(ss.grad_psi.z), delta = nodal(ss.delta_values);
    const SparseMatrix G = diag(px) * ops.U + diag(pz) * ops.W;  // u . grad Psi
    const double coriolis = p.f * (p.alpha0 + p.f);
    q.A2 = SparseMatrix(G.transpose() * diag(wts.cwiseProduct(delta)) * G) -
           coriolis * SparseMatrix(ops.U.transpose() * diag(wts) * ops.U);
    q.A1.makeCompressed();
    q.A2.makeCompressed();
    q.B.makeCompressed();

    double dmax = 0.0;
    for (Eigen::Index n = 0; n < delta.size(); ++n)
        dmax = std::max(dmax, std::max(delta[n], 0.0) * (px[n] * px[n] + pz[n] * pz[n]));
    q.a2_bound = 8.0 * (dmax + std::max(coriolis, 0.0));
    return q;
}

double max_asymmetry(const SparseMatrix& m) {
    const SparseMatrix d = m - SparseMatrix(m.transpose());
    double r = 0.0;
    for (int k = 0; k < d.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(d, k); it; ++it) r = std::max(r, std::abs(it.value()));
    return r;
}

namespace {

AlphaResult iterative_smallest(const SparseMatrix& M, const SparseMatrix& B, double sigma0, const EigenOptions& opt,
                               Eigen::MatrixXd* warm) {
    const Eigen::Index n = M.rows();
    const int b = static_cast<int>(std::min<Eigen::Index>(opt.block_size, n));
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;

    // Shift strictly below the spectrum (no negative pivots).
    double sigma = sigma0;
    for (int attempt = 0;; ++attempt) {
        ldlt.compute(SparseMatrix(M - sigma * B));
        if (negative_pivots(ldlt) == 0) break;
        if (attempt > 60) throw EigenNotConverged(0, std::numeric_limits<double>::infinity());
        sigma = 2.0 * sigma - 1.0;
    }

    Eigen::MatrixXd X;
    if (warm && warm->rows() == n && warm->cols() == b) {
        X = *warm;
    } else {
        std::mt19937_64 rng(0x5eed);
        std::normal_distribution<double> N01;
        X.resize(n, b);
        for (Eigen::Index c = 0; c < X.size(); ++c) X.data()[c] = N01(rng);
    }

    AlphaResult res;
    double last_rel = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= opt.max_iterations; ++it) {
        Eigen::MatrixXd Y = ldlt.solve(B * X);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
        Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, b);
        Eigen::MatrixXd Mq = Q.transpose() * (M * Q);
        Eigen::MatrixXd Bq = Q.transpose() * (B * Q);
        Mq = 0.5 * (Mq + Mq.transpose()).eval();
        Bq = 0.5 * (Bq + Bq.transpose()).eval();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> rr(Mq, Bq);
        if (rr.info() != Eigen::Success) throw EigenNotConverged(it, last_rel);
        X = Q * rr.eigenvectors();  // B-orthonormal Ritz vectors, ascending
        const double theta = rr.eigenvalues()[0];
        const Eigen::VectorXd x = X.col(0);
        last_rel = relative_residual(M, B, x, theta);
        if (last_rel <= opt.tol) {
            res.alpha = theta;
            res.mode = x;
            res.residual = last_rel;
            res.iterations = it;
            if (warm) *warm = X;
            return res;
        }
        // theta is an upper bound for the lowest eigenvalue; tighten the shift from below
        // by inertia bisection so the iteration contracts quickly.
        if (it == 1 || it % 8 == 0) {
            double lo = sigma, hi = theta;
            for (int b2 = 0; b2 < 12 && hi - lo > 1e-3 * (std::abs(theta) + 1e-3 * (theta - sigma0)); ++b2) {
                const double mid = 0.5 * (lo + hi);
                Eigen::SimplicialLDLT<SparseMatrix> f2(SparseMatrix(M - mid * B));
                if (negative_pivots(f2) == 0) lo = mid;
                else hi = mid;
            }
            if (lo > sigma) {
                sigma = lo;
                ldlt.compute(SparseMatrix(M - sigma * B));
            }
        }
    }
    throw EigenNotConverged(opt.max_iterations, last_rel);
}

}  // namespace

AlphaEvaluator::AlphaEvaluator(const QuadraticForms& forms, EigenOptions options)
    : forms_(&forms), options_(options) {
    const int n = forms.dofs();
    dense_ = options_.method == EigenMethod::Dense ||
             (options_.method == EigenMethod::Auto && n <= options_.dense_max_dofs);
    if (dense_) {
        const Eigen::MatrixXd B = Eigen::MatrixXd(forms.B);
        Eigen::LLT<Eigen::MatrixXd> llt(B);
        if (llt.info() != Eigen::Success) throw InvalidArgument("B is not positive definite");
        const Eigen::MatrixXd L = llt.matrixL();
        Linv_t_ = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n)).transpose();
        auto reduce = [&](const SparseMatrix& A) {
            Eigen::MatrixXd C = Linv_t_.transpose() * (Eigen::MatrixXd(A) * Linv_t_);
            return Eigen::MatrixXd(0.5 * (C + C.transpose()));
        };
        C1_ = reduce(forms.A1);
        C2_ = reduce(forms.A2);
    }
}

double AlphaEvaluator::alpha(double s) const {
    if (!dense_) return solve(s).alpha;
    if (!(s > 0.0)) throw InvalidArgument("alpha(s) needs s > 0");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s * forms_->nu * C1_ - C2_, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw EigenNotConverged(0, std::numeric_limits<double>::quiet_NaN());
    return es.eigenvalues()[0];
}

AlphaResult AlphaEvaluator::solve(double s) const {
    if (!(s > 0.0)) throw InvalidArgument("alpha(s) needs s > 0");
    const SparseMatrix M = s * forms_->nu * forms_->A1 - forms_->A2;
    AlphaResult r;
    if (dense_) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s * forms_->nu * C1_ - C2_);
        if (es.info() != Eigen::Success) throw EigenNotConverged(0, std::numeric_limits<double>::quiet_NaN());
        r.alpha = es.eigenvalues()[0];
        r.mode = Linv_t_ * es.eigenvectors().col(0);
        r.residual = relative_residual(M, forms_->B, r.mode, r.alpha);
        r.iterations = 1;
    } else {
        r = iterative_smallest(M, forms_->B, -forms_->a2_bound - 1.0, options_, nullptr);
    }
    // Deterministic sign: largest-magnitude entry positive.
    Eigen::Index imax = 0;
    r.mode.cwiseAbs().maxCoeff(&imax);
    if (r.mode[imax] < 0.0) r.mode = -r.mode;
    return r;
}

AlphaResult alpha_of_s(const QuadraticForms& forms, double s, const EigenOptions& options) {
    return AlphaEvaluator(forms, options).solve(s);
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Unstable: return "Unstable";
        case Verdict::Stable: return "Stable";
        case Verdict::Indeterminate: return "Indeterminate";
    }
    return "Unknown";
}

EigenResult find_lambda0(const QuadraticForms& forms, const LambdaOptions& opt) {
    if (!(opt.s_min > 0.0 && opt.s_max > opt.s_min)) throw InvalidArgument("need 0 < s_min < s_max");
    if (opt.probes_per_decade < 1) throw InvalidArgument("probes_per_decade must be >= 1");
    const AlphaEvaluator ev(forms, opt.eigen);
    EigenResult out;
    auto phi_of = [](double s, double a) { return -s * s - a; };
    auto sample = [&](double s) {
        const double a = ev.alpha(s);
        out.alpha_samples.push_back({s, a});
        return a;
    };

    const double decades = std::log10(opt.s_max / opt.s_min);
    const int nprobe = static_cast<int>(std::ceil(decades * opt.probes_per_decade - 1e-9)) + 1;
    auto probe = [&](int i) { return std::min(opt.s_max, opt.s_min * std::pow(10.0, double(i) / opt.probes_per_decade)); };

    const double s0 = probe(0);
    const double a0 = sample(s0);
    std::ostringstream diag;
    if (a0 >= 0.0) {
        out.verdict = Verdict::Stable;
        diag << "alpha(s_min=" << s0 << ") = " << a0 << " >= 0; alpha is increasing so E(s,u) >= 0 on the probe range";
        out.diagnostics = diag.str();
        return out;
    }
    double lo = s0, phi_lo = phi_of(s0, a0);
    if (phi_lo <= 0.0) {
        out.verdict = Verdict::Indeterminate;
        diag << "alpha(s_min) = " << a0 << " < 0 but Phi(s_min) = " << phi_lo << " <= 0; root lies below s_min";
        out.diagnostics = diag.str();
        return out;
    }
    double hi = 0.0;
    bool bracketed = false;
    for (int i = 1; i < nprobe; ++i) {
        const double s = probe(i);
        const double phi = phi_of(s, sample(s));
        if (phi < 0.0) {
            hi = s;
            bracketed = true;
            break;
        }
        lo = s;
        phi_lo = phi;
    }
    if (!bracketed) {
        out.verdict = Verdict::Indeterminate;
        diag << "Phi stays positive up to s_max = " << opt.s_max << " (no bracket)";
        out.diagnostics = diag.str();
        return out;
    }

    double s_star = 0.5 * (lo + hi), phi_star = 0.0;
    int it = 0;
    for (; it < opt.max_bisections; ++it) {
        s_star = 0.5 * (lo + hi);
        phi_star = phi_of(s_star, ev.alpha(s_star));
        if (std::abs(phi_star) <= opt.root_rel_tol * std::max(1.0, s_star * s_star)) break;
        if (phi_star > 0.0) lo = s_star;
        else hi = s_star;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
    }
    const AlphaResult mode = ev.solve(s_star);
    out.verdict = Verdict::Unstable;
    out.s_star = s_star;
    out.lambda0 = s_star;
    out.phi_at_root = phi_of(s_star, mode.alpha);
    out.mode = mode.mode;
    out.mode_psi = forms.to_field(mode.mode);
    Velocity vel = velocity_from_psi(out.mode_psi);
    out.mode_u = std::move(vel.u);
    out.mode_w = std::move(vel.w);
    diag << "bracket found, " << it + 1 << " bisection steps, |Phi(s*)| = " << std::abs(out.phi_at_root);
    out.diagnostics = diag.str();
    return out;
}

Classification classify(const SteadyState& ss, const PhysicalParams& p, const Grid& grid,
                        const LambdaOptions& options) {
    Classification c;
    c.result = find_lambda0(assemble_forms(ss, p, grid), options);
    ConditionsReport& r = c.conditions;
    r.max_delta = -std::numeric_limits<double>::infinity();
    for (double d : ss.delta_values.values()) r.max_delta = std::max(r.max_delta, d);
    r.f_plus_alpha0 = p.f + p.alpha0;
    if (r.max_delta < 0.0 && r.f_plus_alpha0 > 0.0) {
        r.branch = Branch::StableBranch;
        r.agrees = c.result.verdict == Verdict::Stable;
        r.note = "delta < 0 everywhere and f + alpha0 > 0: stable branch";
    } else if (r.max_delta > 0.0 && r.f_plus_alpha0 <= 0.0) {
        r.branch = Branch::UnstableBranch;
        r.agrees = c.result.verdict == Verdict::Unstable;
        r.note = "delta > 0 somewhere and f + alpha0 <= 0: unstable branch";
    } else {
        r.branch = Branch::Outside;
        r.agrees = true;
        r.note = "outside the stable/unstable sign-condition dichotomy; spectral verdict only";
    }
    if (!r.agrees) spdlog::warn("spectral verdict {} disagrees with the sign conditions ({})", to_string(c.result.verdict), r.note);
    return c;
}

}  // namespace bsnq
