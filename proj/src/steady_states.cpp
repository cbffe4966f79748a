#include "bsnq/steady_states.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "bsnq/error.hpp"
#include "bsnq/field_io.hpp"
#include "bsnq/operators.hpp"
#include "json.hpp"

namespace bsnq {

PotentialSpec PotentialSpec::linear_z(double g) {
    PotentialSpec s;
    s.kind = Kind::LinearZ;
    s.g = g;
    return s;
}

PotentialSpec PotentialSpec::harmonic_mode(double g, double eps, int m) {
    PotentialSpec s;
    s.kind = Kind::HarmonicMode;
    s.g = g;
    s.eps = eps;
    s.m = m;
    return s;
}

PotentialSpec PotentialSpec::tabulated(ScalarField psi, ScalarField psi_x, ScalarField psi_z) {
    require_same_grid(psi.grid(), psi_x.grid(), "PotentialSpec::tabulated");
    require_same_grid(psi.grid(), psi_z.grid(), "PotentialSpec::tabulated");
    psi.ensure_finite("tabulated Psi");
    psi_x.ensure_finite("tabulated Psi_x");
    psi_z.ensure_finite("tabulated Psi_z");
    PotentialSpec s;
    s.kind = Kind::Tabulated;
    s.psi = std::move(psi);
    s.psi_x = std::move(psi_x);
    s.psi_z = std::move(psi_z);
    return s;
}

std::string to_string(PotentialSpec::Kind k) {
    switch (k) {
        case PotentialSpec::Kind::LinearZ: return "linear_z";
        case PotentialSpec::Kind::HarmonicMode: return "harmonic_mode";
        case PotentialSpec::Kind::Tabulated: return "tabulated";
    }
    return "unknown";
}

namespace {

void require_tabulated_grid(const ScalarField& f, const Grid& grid, const char* what) {
    if (!(f.grid() == grid)) throw InvalidArgument(std::string(what) + " is tabulated on a different grid");
}

double poly(const std::vector<double>& c, double t) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
    return acc;
}

double poly_derivative(const std::vector<double>& c, double t) {
    double acc = 0.0;
    for (std::size_t n = c.size(); n-- > 1;) acc = acc * t + static_cast<double>(n) * c[n];
    return acc;
}

double max_product_scale(const ScalarField& delta, const Gradient& grad) {
    double s = 0.0;
    for (std::size_t n = 0; n < delta.size(); ++n) {
        const double d = std::abs(delta.values()[n]);
        s = std::max(s, d * std::hypot(grad.x.values()[n], grad.z.values()[n]));
    }
    return s;
}

}  // namespace

ScalarField potential_field(const PotentialSpec& spec, const Grid& grid) {
    switch (spec.kind) {
        case PotentialSpec::Kind::LinearZ:
            return ScalarField::sample(grid, [&](double, double z) { return spec.g * z; });
        case PotentialSpec::Kind::HarmonicMode: {
            const double k = grid.wavenumber(spec.m);
            return ScalarField::sample(
                grid, [&](double x, double z) { return spec.g * z + spec.eps * std::exp(k * z) * std::cos(k * x); });
        }
        case PotentialSpec::Kind::Tabulated:
            require_tabulated_grid(spec.psi, grid, "Psi");
            return spec.psi;
    }
    throw InvalidArgument("unknown potential kind");
}

Gradient potential_gradient(const PotentialSpec& spec, const Grid& grid) {
    switch (spec.kind) {
        case PotentialSpec::Kind::LinearZ:
            return Gradient{ScalarField(grid), ScalarField(grid, spec.g)};
        case PotentialSpec::Kind::HarmonicMode: {
            const double k = grid.wavenumber(spec.m);
            const double a = spec.eps * k;
            return Gradient{
                ScalarField::sample(grid, [&](double x, double z) { return -a * std::exp(k * z) * std::sin(k * x); }),
                ScalarField::sample(grid,
                                    [&](double x, double z) { return spec.g + a * std::exp(k * z) * std::cos(k * x); })};
        }
        case PotentialSpec::Kind::Tabulated:
            require_tabulated_grid(spec.psi_x, grid, "Psi_x");
            return Gradient{spec.psi_x, spec.psi_z};
    }
    throw InvalidArgument("unknown potential kind");
}

DeltaSpec DeltaSpec::constant(double c) {
    DeltaSpec d;
    d.kind = Kind::Constant;
    d.c = c;
    return d;
}

DeltaSpec DeltaSpec::function_of_psi(std::vector<double> coeffs) {
    if (coeffs.empty()) throw InvalidArgument("FunctionOfPsi needs at least one coefficient");
    DeltaSpec d;
    d.kind = Kind::FunctionOfPsi;
    d.coeffs = std::move(coeffs);
    return d;
}

DeltaSpec DeltaSpec::tabulated(ScalarField delta) {
    delta.ensure_finite("tabulated delta");
    DeltaSpec d;
    d.kind = Kind::Tabulated;
    d.table = std::move(delta);
    return d;
}

std::string to_string(DeltaSpec::Kind k) {
    switch (k) {
        case DeltaSpec::Kind::Constant: return "constant";
        case DeltaSpec::Kind::FunctionOfPsi: return "function_of_psi";
        case DeltaSpec::Kind::Tabulated: return "tabulated";
    }
    return "unknown";
}

ScalarField delta_field(const DeltaSpec& delta, const PotentialSpec& psi, const Grid& grid) {
    switch (delta.kind) {
        case DeltaSpec::Kind::Constant:
            return ScalarField(grid, delta.c);
        case DeltaSpec::Kind::FunctionOfPsi: {
            ScalarField out = potential_field(psi, grid);
            for (double& v : out.values()) v = poly(delta.coeffs, v);
            return out;
        }
        case DeltaSpec::Kind::Tabulated:
            require_tabulated_grid(delta.table, grid, "delta");
            return delta.table;
    }
    throw InvalidArgument("unknown delta kind");
}

void PhysicalParams::validate() const {
    for (double v : {f, nu, alpha, alpha0, gamma, beta})
        if (!std::isfinite(v)) throw InvalidArgument("physical parameters must be finite");
    if (!(nu > 0.0)) throw InvalidArgument("nu must be positive");
    if (alpha < 0.0) throw InvalidArgument("alpha must be non-negative");
    if (f < 0.0) throw InvalidArgument("f must be non-negative");
    if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
    if (f == 0.0) spdlog::warn("f = 0: degenerate rotation, permitted for validation runs only");
    if (alpha == 0.0) spdlog::warn("alpha = 0: stress-free bottom, permitted for validation runs only");
}

double validate_harmonic(const PotentialSpec& psi, const Grid& grid) {
    return laplacian(potential_field(psi, grid)).max_abs();
}

double validate_exactness(const DeltaSpec& delta, const PotentialSpec& psi, const Grid& grid) {
    switch (delta.kind) {
        case DeltaSpec::Kind::Constant: {
            const ScalarField p = potential_field(psi, grid);
            ScalarField curl = ddz(delta.c * ddx(p)) - ddx(delta.c * ddz(p));
            return curl.max_abs();
        }
        case DeltaSpec::Kind::FunctionOfPsi: {
            const ScalarField p = potential_field(psi, grid);
            const Gradient gr = potential_gradient(psi, grid);
            double r = 0.0;
            for (std::size_t n = 0; n < p.size(); ++n) {
                const double d1 = poly_derivative(delta.coeffs, p.values()[n]);
                const double gx = gr.x.values()[n], gz = gr.z.values()[n];
                r = std::max(r, std::abs(d1 * gz * gx - d1 * gx * gz));
            }
            return r;
        }
        case DeltaSpec::Kind::Tabulated: {
            const ScalarField d = delta_field(delta, psi, grid);
            const Gradient gr = potential_gradient(psi, grid);
            ScalarField curl = ddz(hadamard(d, gr.x)) - ddx(hadamard(d, gr.z));
            return curl.max_abs();
        }
    }
    throw InvalidArgument("unknown delta kind");
}

double seam_jump(const DeltaSpec& delta, const PotentialSpec& psi, const Grid& grid) {
    const ScalarField d = delta_field(delta, psi, grid);
    const Gradient gr = potential_gradient(psi, grid);
    const ScalarField q = hadamard(d, gr.x);
    double jump = 0.0;
    for (int j = 0; j < grid.Nz; ++j) jump = std::max(jump, std::abs(grid.dx() * pairwise_sum(q.row(j))));
    return jump;
}

ScalarField construct_rho_s(const DeltaSpec& delta, const PotentialSpec& psi, double rho_ref, const Grid& grid,
                            const ConstructionOptions& options) {
    const ScalarField d = delta_field(delta, psi, grid);
    const Gradient gr = potential_gradient(psi, grid);
    const double scale = max_product_scale(d, gr);

    const double curl = validate_exactness(delta, psi, grid);
    if (curl > options.curl_rel_tol * scale / std::min(grid.Lx, grid.h) + 1e-12) throw Inexact1Form(curl);
    const double jump = seam_jump(delta, psi, grid);
    if (jump > options.seam_rel_tol * scale * grid.Lx + 1e-12) throw NonPeriodicPrimitive(jump);

    const ScalarField qx = hadamard(d, gr.x);
    const ScalarField qz = hadamard(d, gr.z);
    ScalarField rhs = ddx(qx) + ddz(qz);
    ScalarField rho = poisson_neumann(rhs, wall_traces(qz));
    rho += ScalarField(grid, rho_ref - rho(0, 0));
    return rho;
}

ScalarField solve_p_s(const DeltaSpec& delta, const PotentialSpec& psi, const ScalarField& rho_s, const Grid& grid) {
    require_same_grid(rho_s.grid(), grid, "solve_p_s");
    const ScalarField d = delta_field(delta, psi, grid);
    const Gradient gr = potential_gradient(psi, grid);
    ScalarField rhs(grid);
    for (std::size_t n = 0; n < rhs.size(); ++n) {
        const double gx = gr.x.values()[n], gz = gr.z.values()[n];
        rhs.values()[n] = -d.values()[n] * (gx * gx + gz * gz);
    }
    ScalarField flux = hadamard(rho_s, gr.z);
    flux *= -1.0;
    return poisson_neumann(rhs, wall_traces(flux));
}

double p0_profile(double f, double a0, double a1, double x) { return 0.5 * f * a0 * x * x + f * a1 * x; }

SteadyState build_steady_state(const DeltaSpec& delta, const PotentialSpec& potential, double a0, double a1,
                               double rho_ref, const Grid& grid, const ConstructionOptions& options) {
    SteadyState ss;
    ss.delta = delta;
    ss.potential = potential;
    ss.a0 = a0;
    ss.a1 = a1;
    ss.rho_ref = rho_ref;
    ss.psi = potential_field(potential, grid);
    ss.grad_psi = potential_gradient(potential, grid);
    ss.delta_values = delta_field(delta, potential, grid);

    // Truncation error of a smooth harmonic potential sits far below this; a genuinely
    // non-harmonic input (lap Psi = O(|Psi| / h^2)) does not.
    const double harm = validate_harmonic(potential, grid);
    if (harm > 1e-3 * std::max(1.0, ss.psi.max_abs()) / (grid.h * grid.h))
        spdlog::warn("potential is not discretely harmonic: max|lap Psi| = {:.3e}", harm);

    ss.rho_s = construct_rho_s(delta, potential, rho_ref, grid, options);
    ss.p_s = solve_p_s(delta, potential, *ss.rho_s, grid);
    return ss;
}

BalanceResiduals balance_residuals(const SteadyState& ss, double f, const Grid& grid) {
    if (!ss.rho_s || !ss.p_s) throw InvalidArgument("balance_residuals needs rho_s and p_s");
    (void)f;  // f*v_s - d_x p0 = f*(a0 x + a1) - f*(a0 x + a1) = 0
    const ScalarField& rho = *ss.rho_s;
    const ScalarField& p = *ss.p_s;
    const ScalarField px = ddx(p);
    const ScalarField pz = ddz(p);
    BalanceResiduals r;
    for (int i = 0; i < grid.Nx; ++i) {
        for (int j = 1; j < grid.Nz - 1; ++j) {
            r.r_geo = std::max(r.r_geo, std::abs(-px(i, j) - rho(i, j) * ss.grad_psi.x(i, j)));
            r.r_hyd = std::max(r.r_hyd, std::abs(pz(i, j) + rho(i, j) * ss.grad_psi.z(i, j)));
        }
    }
    return r;
}

void export_steady_bundle(const std::filesystem::path& dir, const SteadyState& ss, const PhysicalParams& params) {
    if (!ss.rho_s || !ss.p_s) throw InvalidArgument("export_steady_bundle needs rho_s and p_s");
    std::filesystem::create_directories(dir);
    write_snapshot(dir / "rho_s.bsnq", *ss.rho_s);
    write_snapshot(dir / "p_s.bsnq", *ss.p_s);
    nlohmann::ordered_json header;
    header["f"] = params.f;
    header["nu"] = params.nu;
    header["alpha"] = params.alpha;
    header["a0"] = ss.a0;
    header["a1"] = ss.a1;
    header["rho_ref"] = ss.rho_ref;
    header["delta_kind"] = to_string(ss.delta.kind);
    header["potential_kind"] = to_string(ss.potential.kind);
    std::ofstream os(dir / "steady.json");
    if (!os) throw IoError("cannot write steady.json");
    os << header.dump(2) << '\n';
}

}  // namespace bsnq
