#include "bsnq/spectral.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace bsnq {

namespace {

struct PlanPair {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
};

// FFTW planning is not thread-safe; execution with new-array functions is.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    PlanPair get(int Nx, int Nz) {
        std::lock_guard lock(mutex_);
        auto it = plans_.find({Nx, Nz});
        if (it != plans_.end()) return it->second;

        const int n[1] = {Nx};
        const int nc = Nx / 2 + 1;
        std::vector<double> rbuf(static_cast<std::size_t>(Nx) * Nz);
        std::vector<fftw_complex> cbuf(static_cast<std::size_t>(nc) * Nz);
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        PlanPair p;
        // Transform along x: element stride Nz, one transform per z-level.
        p.r2c = fftw_plan_many_dft_r2c(1, n, Nz, rbuf.data(), nullptr, Nz, 1, cbuf.data(), nullptr, Nz, 1, flags);
        p.c2r = fftw_plan_many_dft_c2r(1, n, Nz, cbuf.data(), nullptr, Nz, 1, rbuf.data(), nullptr, Nz, 1,
                                       flags | FFTW_DESTROY_INPUT);
        plans_.emplace(std::make_pair(Nx, Nz), p);
        return p;
    }

private:
    std::mutex mutex_;
    std::map<std::pair<int, int>, PlanPair> plans_;
};

}  // namespace

Spectrum::Spectrum(const Grid& grid)
    : grid_(grid), c_(static_cast<std::size_t>(grid.Nx / 2 + 1) * grid.Nz) {}

Spectrum forward_x(const ScalarField& f) {
    const Grid& g = f.grid();
    Spectrum s(g);
    PlanPair p = PlanCache::instance().get(g.Nx, g.Nz);
    std::vector<double> in(f.values().begin(), f.values().end());
    fftw_execute_dft_r2c(p.r2c, in.data(), reinterpret_cast<fftw_complex*>(s.data()));
    const double scale = 1.0 / g.Nx;
    const std::size_t n = static_cast<std::size_t>(s.modes()) * g.Nz;
    for (std::size_t m = 0; m < n; ++m) s.data()[m] *= scale;
    return s;
}

ScalarField inverse_x(const Spectrum& s) {
    const Grid& g = s.grid();
    PlanPair p = PlanCache::instance().get(g.Nx, g.Nz);
    const std::size_t n = static_cast<std::size_t>(s.modes()) * g.Nz;
    std::vector<std::complex<double>> work(s.data(), s.data() + n);
    ScalarField out(g);
    fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(work.data()), out.values().data());
    return out;
}

void truncate_modes(Spectrum& s, int kmax) {
    const int nz = s.grid().Nz;
    for (int k = kmax + 1; k < s.modes(); ++k)
        for (int j = 0; j < nz; ++j) s(k, j) = 0.0;
}

}  // namespace bsnq
