#include "bsnq/operators.hpp"

#include <cmath>
#include <complex>
#include <vector>

#include "bsnq/error.hpp"
#include "bsnq/spectral.hpp"

namespace bsnq {

namespace {

using cplx = std::complex<double>;

// Thomas algorithm for a real tridiagonal matrix and complex right-hand side.
// lower[0] and upper[n-1] are unused. rhs is overwritten by the solution.
void thomas(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper, cplx* rhs, int n) {
    for (int m = 1; m < n; ++m) {
        const double f = lower[m] / diag[m - 1];
        diag[m] -= f * upper[m - 1];
        rhs[m] -= f * rhs[m - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (int m = n - 2; m >= 0; --m) rhs[m] = (rhs[m] - upper[m] * rhs[m + 1]) / diag[m];
}

// Fourier coefficients of two wall traces, laid out as a two-level spectrum.
Spectrum wall_spectrum(const Grid& g, const BoundaryPair& b) {
    if (static_cast<int>(b.bottom.size()) != g.Nx || static_cast<int>(b.top.size()) != g.Nx)
        throw InvalidArgument("boundary trace length must equal Nx");
    Grid g2 = g;
    g2.Nz = 2;
    ScalarField f(g2);
    for (int i = 0; i < g.Nx; ++i) {
        f(i, 0) = b.bottom[i];
        f(i, 1) = b.top[i];
    }
    return forward_x(f);
}

ScalarField checked(ScalarField f, const char* where) {
    f.ensure_finite(where);
    return f;
}

}  // namespace

ScalarField ddx(const ScalarField& f) {
    const Grid& g = f.grid();
    Spectrum s = forward_x(f);
    const int nyq = g.Nx / 2;
    for (int k = 0; k < s.modes(); ++k) {
        const cplx factor = (k == nyq) ? cplx(0.0) : cplx(0.0, g.wavenumber(k));
        for (int j = 0; j < g.Nz; ++j) s(k, j) *= factor;
    }
    return checked(inverse_x(s), "ddx");
}

ScalarField d2dx2(const ScalarField& f) {
    const Grid& g = f.grid();
    Spectrum s = forward_x(f);
    for (int k = 0; k < s.modes(); ++k) {
        const double kk = g.wavenumber(k);
        for (int j = 0; j < g.Nz; ++j) s(k, j) *= -kk * kk;
    }
    return checked(inverse_x(s), "d2dx2");
}

ScalarField ddz(const ScalarField& f, ZStencil hint) {
    const Grid& g = f.grid();
    const int N = g.Nz - 1;
    const double inv2dz = 1.0 / (2.0 * g.dz());
    ScalarField out(g);
    for (int i = 0; i < g.Nx; ++i) {
        for (int j = 1; j < N; ++j) out(i, j) = (f(i, j + 1) - f(i, j - 1)) * inv2dz;
        if (hint == ZStencil::OneSidedAtBoundary) {
            out(i, 0) = (-3.0 * f(i, 0) + 4.0 * f(i, 1) - f(i, 2)) * inv2dz;
            out(i, N) = (3.0 * f(i, N) - 4.0 * f(i, N - 1) + f(i, N - 2)) * inv2dz;
        }
    }
    return checked(std::move(out), "ddz");
}

ScalarField ddz_sbp(const ScalarField& f) {
    const Grid& g = f.grid();
    const int N = g.Nz - 1;
    const double inv2dz = 1.0 / (2.0 * g.dz());
    ScalarField out(g);
    for (int i = 0; i < g.Nx; ++i) {
        for (int j = 1; j < N; ++j) out(i, j) = (f(i, j + 1) - f(i, j - 1)) * inv2dz;
        out(i, 0) = (f(i, 1) - f(i, 0)) * 2.0 * inv2dz;
        out(i, N) = (f(i, N) - f(i, N - 1)) * 2.0 * inv2dz;
    }
    return checked(std::move(out), "ddz_sbp");
}

ScalarField laplacian(const ScalarField& f) {
    const Grid& g = f.grid();
    ScalarField fxx = d2dx2(f);
    const double inv_dz2 = 1.0 / (g.dz() * g.dz());
    ScalarField out(g);
    for (int i = 0; i < g.Nx; ++i)
        for (int j = 1; j < g.Nz - 1; ++j)
            out(i, j) = fxx(i, j) + (f(i, j + 1) - 2.0 * f(i, j) + f(i, j - 1)) * inv_dz2;
    return checked(std::move(out), "laplacian");
}

ScalarField solve_helmholtz_dirichlet(const ScalarField& rhs, double c, const BoundaryPair& walls) {
    rhs.ensure_finite("solve_helmholtz_dirichlet(rhs)");
    const Grid& g = rhs.grid();
    const int N = g.Nz - 1;
    const int n = N - 1;  // interior unknowns
    Spectrum s = forward_x(rhs);
    Spectrum b = wall_spectrum(g, walls);
    const double inv_dz2 = 1.0 / (g.dz() * g.dz());

    std::vector<double> lower(n, -c * inv_dz2), upper(n, -c * inv_dz2), diag(n);
    std::vector<cplx> col(n);
    for (int k = 0; k < s.modes(); ++k) {
        const double kk = g.wavenumber(k);
        std::fill(diag.begin(), diag.end(), 1.0 + c * (2.0 * inv_dz2 + kk * kk));
        for (int m = 0; m < n; ++m) col[m] = s(k, m + 1);
        col[0] += c * inv_dz2 * b(k, 0);
        col[n - 1] += c * inv_dz2 * b(k, 1);
        thomas(lower, diag, upper, col.data(), n);
        s(k, 0) = b(k, 0);
        for (int m = 0; m < n; ++m) s(k, m + 1) = col[m];
        s(k, N) = b(k, 1);
    }
    return checked(inverse_x(s), "solve_helmholtz_dirichlet");
}

ScalarField solve_helmholtz_slip(const ScalarField& rhs, double c, double alpha) {
    rhs.ensure_finite("solve_helmholtz_slip(rhs)");
    const Grid& g = rhs.grid();
    const int N = g.Nz - 1;
    const int n = N - 1;
    Spectrum s = forward_x(rhs);
    const double dz = g.dz();
    const double inv_dz2 = 1.0 / (dz * dz);
    const double coupling = c * inv_dz2;

    std::vector<double> t_off(n, -c * inv_dz2), t_diag(n), l_off(n, inv_dz2), l_diag(n);
    std::vector<cplx> y(n), zcol(n), q(n);
    for (int k = 0; k < s.modes(); ++k) {
        const double kk = g.wavenumber(k);
        std::fill(t_diag.begin(), t_diag.end(), 1.0 + c * (2.0 * inv_dz2 + kk * kk));
        std::fill(l_diag.begin(), l_diag.end(), -2.0 * inv_dz2 - kk * kk);
        // omega_0 = q . omega with q = L^{-1} a, a the one-sided alpha psi_z(0) stencil.
        std::fill(q.begin(), q.end(), cplx(0.0));
        q[0] = 2.0 * alpha / dz;
        if (n > 1) q[1] = -0.5 * alpha / dz;
        thomas(l_off, l_diag, l_off, q.data(), n);
        std::fill(zcol.begin(), zcol.end(), cplx(0.0));
        zcol[0] = 1.0;
        thomas(t_off, t_diag, t_off, zcol.data(), n);
        for (int m = 0; m < n; ++m) y[m] = s(k, m + 1);
        thomas(t_off, t_diag, t_off, y.data(), n);
        // Sherman-Morrison for (T - coupling e_0 q^T) omega = r.
        cplx qy = 0.0, qz = 0.0;
        for (int m = 0; m < n; ++m) {
            qy += q[m].real() * y[m];
            qz += q[m].real() * zcol[m];
        }
        const cplx factor = coupling * qy / (1.0 - coupling * qz);
        cplx w0 = 0.0;
        for (int m = 0; m < n; ++m) {
            y[m] += factor * zcol[m];
            w0 += q[m].real() * y[m];
        }
        s(k, 0) = w0;
        for (int m = 0; m < n; ++m) s(k, m + 1) = y[m];
        s(k, N) = 0.0;
    }
    return checked(inverse_x(s), "solve_helmholtz_slip");
}

ScalarField poisson_dirichlet(const ScalarField& rhs) {
    rhs.ensure_finite("poisson_dirichlet(rhs)");
    const Grid& g = rhs.grid();
    const int N = g.Nz - 1;
    const int n = N - 1;
    Spectrum s = forward_x(rhs);
    const double inv_dz2 = 1.0 / (g.dz() * g.dz());

    std::vector<double> lower(n, inv_dz2), upper(n, inv_dz2), diag(n);
    std::vector<cplx> col(n);
    for (int k = 0; k < s.modes(); ++k) {
        const double kk = g.wavenumber(k);
        std::fill(diag.begin(), diag.end(), -2.0 * inv_dz2 - kk * kk);
        for (int m = 0; m < n; ++m) col[m] = s(k, m + 1);
        thomas(lower, diag, upper, col.data(), n);
        s(k, 0) = 0.0;
        for (int m = 0; m < n; ++m) s(k, m + 1) = col[m];
        s(k, N) = 0.0;
    }
    return checked(inverse_x(s), "poisson_dirichlet");
}

ScalarField poisson_neumann(const ScalarField& rhs, const BoundaryPair& flux, const NeumannOptions& options,
                            NeumannReport* report) {
    rhs.ensure_finite("poisson_neumann(rhs)");
    const Grid& g = rhs.grid();
    const int N = g.Nz - 1;
    const double dz = g.dz();
    const double inv_dz2 = 1.0 / (dz * dz);
    Spectrum s = forward_x(rhs);
    Spectrum b = wall_spectrum(g, flux);

    // Solvability of the k = 0 problem: sum_j w_j rbar_j = gbar_top - gbar_bottom.
    double integral = 0.0;
    for (int j = 0; j <= N; ++j) integral += g.z_weight(j) * s(0, j).real();
    const double defect = integral - (b(0, 1).real() - b(0, 0).real());
    double scale = g.h * rhs.max_abs();
    for (int i = 0; i < g.Nx; ++i) scale = std::max(scale, std::max(std::abs(flux.bottom[i]), std::abs(flux.top[i])));
    if (report) *report = NeumannReport{defect, scale};
    if (std::abs(defect) > options.compat_rel_tol * scale + 1e-300) throw NeumannIncompatible(defect, scale);
    for (int j = 0; j <= N; ++j) s(0, j) -= defect / g.h;

    // k = 0: pin p_0 = 0, drop row 0, solve for p_1..p_N, then remove the mean.
    {
        const int n = N;
        std::vector<double> lower(n, inv_dz2), upper(n, inv_dz2), diag(n, -2.0 * inv_dz2);
        lower[n - 1] = 2.0 * inv_dz2;
        std::vector<cplx> col(n);
        for (int m = 0; m < n; ++m) col[m] = s(0, m + 1).real();
        col[n - 1] -= 2.0 * b(0, 1).real() / dz;
        thomas(lower, diag, upper, col.data(), n);
        s(0, 0) = 0.0;
        for (int m = 0; m < n; ++m) s(0, m + 1) = col[m].real();
        double avg = 0.0;
        for (int j = 0; j <= N; ++j) avg += g.z_weight(j) * s(0, j).real();
        avg /= g.h;
        for (int j = 0; j <= N; ++j) s(0, j) -= avg;
    }

    const int n = N + 1;
    std::vector<double> lower(n, inv_dz2), upper(n, inv_dz2), diag(n);
    upper[0] = 2.0 * inv_dz2;
    lower[n - 1] = 2.0 * inv_dz2;
    std::vector<cplx> col(n);
    for (int k = 1; k < s.modes(); ++k) {
        const double kk = g.wavenumber(k);
        std::fill(diag.begin(), diag.end(), -2.0 * inv_dz2 - kk * kk);
        for (int m = 0; m < n; ++m) col[m] = s(k, m);
        col[0] += 2.0 * b(k, 0) / dz;
        col[n - 1] -= 2.0 * b(k, 1) / dz;
        thomas(lower, diag, upper, col.data(), n);
        for (int m = 0; m < n; ++m) s(k, m) = col[m];
    }
    return checked(inverse_x(s), "poisson_neumann");
}

Velocity velocity_from_psi(const ScalarField& psi) {
    const Grid& g = psi.grid();
    const double tol = 1e-12 * std::max(1.0, psi.max_abs());
    for (int i = 0; i < g.Nx; ++i) {
        if (std::abs(psi(i, 0)) > tol || std::abs(psi(i, g.Nz - 1)) > tol)
            throw InvalidArgument("velocity_from_psi: streamfunction must vanish on both walls");
    }
    ScalarField u = ddz(psi);
    u *= -1.0;
    return Velocity{std::move(u), ddx(psi)};
}

ScalarField divergence(const ScalarField& u, const ScalarField& w) { return ddx(u) + ddz(w); }

ScalarField dealias_23(const ScalarField& f) {
    Spectrum s = forward_x(f);
    truncate_modes(s, f.grid().Nx / 3);
    return inverse_x(s);
}

BoundaryPair wall_traces(const ScalarField& f) { return BoundaryPair{f.row(0), f.row(f.grid().Nz - 1)}; }

}  // namespace bsnq
