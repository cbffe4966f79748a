#include "bsnq/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bsnq/error.hpp"

namespace bsnq {

double Grid::wavenumber(int k) const { return 2.0 * std::numbers::pi * k / Lx; }

Grid build_grid(double Lx, double h, int Nx, int Nz) {
    if (!(Lx > 0.0) || !std::isfinite(Lx)) throw InvalidArgument("Lx must be positive");
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("h must be positive");
    if (Nx % 2 != 0) throw InvalidArgument("Nx must be even");
    if (Nx < 4) throw InvalidArgument("Nx must be at least 4");
    if (Nz < 3) throw InvalidArgument("Nz must be at least 3");
    return Grid{Lx, h, Nx, Nz};
}

ScalarField::ScalarField(const Grid& grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

ScalarField::ScalarField(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw InvalidArgument("field size does not match grid");
}

ScalarField ScalarField::sample(const Grid& grid, const std::function<double(double, double)>& f) {
    ScalarField out(grid);
    for (int i = 0; i < grid.Nx; ++i)
        for (int j = 0; j < grid.Nz; ++j) out(i, j) = f(grid.x(i), grid.z(j));
    return out;
}

void require_same_grid(const Grid& a, const Grid& b, const char* where) {
    if (!(a == b)) throw InvalidArgument(std::string(where) + ": fields live on different grids");
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
    require_same_grid(grid_, o.grid_, "operator+=");
    for (std::size_t n = 0; n < values_.size(); ++n) values_[n] += o.values_[n];
    return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
    require_same_grid(grid_, o.grid_, "operator-=");
    for (std::size_t n = 0; n < values_.size(); ++n) values_[n] -= o.values_[n];
    return *this;
}

ScalarField& ScalarField::operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
}

ScalarField& ScalarField::axpy(double a, const ScalarField& o) {
    require_same_grid(grid_, o.grid_, "axpy");
    for (std::size_t n = 0; n < values_.size(); ++n) values_[n] += a * o.values_[n];
    return *this;
}

double ScalarField::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

bool ScalarField::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void ScalarField::ensure_finite(const std::string& where) const {
    if (!all_finite()) throw NonFiniteField(where + ": non-finite value in field");
}

std::vector<double> ScalarField::row(int j) const {
    std::vector<double> r(grid_.Nx);
    for (int i = 0; i < grid_.Nx; ++i) r[i] = (*this)(i, j);
    return r;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }

ScalarField hadamard(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a.grid(), b.grid(), "hadamard");
    ScalarField out(a.grid());
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    for (std::size_t n = 0; n < ov.size(); ++n) ov[n] = av[n] * bv[n];
    return out;
}

BoundaryPair BoundaryPair::zeros(const Grid& grid) {
    return BoundaryPair{std::vector<double>(grid.Nx, 0.0), std::vector<double>(grid.Nx, 0.0)};
}

double pairwise_sum(std::span<const double> v) {
    constexpr std::size_t kBlock = 32;
    if (v.size() <= kBlock) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

namespace {

// Sums g(value) with quadrature weights in a fixed order.
template <typename F>
double weighted_sum(const ScalarField& f, F&& g) {
    const Grid& gr = f.grid();
    std::vector<double> terms(f.size());
    for (int i = 0; i < gr.Nx; ++i)
        for (int j = 0; j < gr.Nz; ++j) terms[gr.index(i, j)] = gr.z_weight(j) * g(f(i, j));
    return gr.dx() * pairwise_sum(terms);
}

}  // namespace

double integrate(const ScalarField& f) {
    return weighted_sum(f, [](double v) { return v; });
}

double mean(const ScalarField& f) { return integrate(f) / f.grid().area(); }

double inner(const ScalarField& f, const ScalarField& g) {
    require_same_grid(f.grid(), g.grid(), "inner");
    const Grid& gr = f.grid();
    std::vector<double> terms(f.size());
    for (int i = 0; i < gr.Nx; ++i)
        for (int j = 0; j < gr.Nz; ++j) terms[gr.index(i, j)] = gr.z_weight(j) * f(i, j) * g(i, j);
    return gr.dx() * pairwise_sum(terms);
}

double norm_lq(const ScalarField& f, double q) {
    if (!(q >= 1.0)) throw InvalidArgument("norm_lq: q must be >= 1");
    if (q == 2.0) return std::sqrt(weighted_sum(f, [](double v) { return v * v; }));
    const double s = weighted_sum(f, [q](double v) { return std::pow(std::abs(v), q); });
    return std::pow(s, 1.0 / q);
}

double bottom_trace_l2sq(const ScalarField& f) {
    const auto r = f.row(0);
    std::vector<double> sq(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) sq[i] = r[i] * r[i];
    return f.grid().dx() * pairwise_sum(sq);
}

}  // namespace bsnq
