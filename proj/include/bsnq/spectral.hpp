/// @file spectral.hpp
/// @brief Real-to-complex Fourier transforms along the periodic x direction.
///
/// Coefficients are normalized so that f(x_i, z_j) = sum_k c_k(z_j) e^{i k x_i}
/// over the full (conjugate-symmetric) spectrum; only 0 <= k <= Nx/2 is stored.
#pragma once

#include <complex>
#include <vector>

#include "bsnq/grid.hpp"

namespace bsnq {

class Spectrum {
public:
    explicit Spectrum(const Grid& grid);

    const Grid& grid() const { return grid_; }
    int modes() const { return grid_.Nx / 2 + 1; }
    std::complex<double>& operator()(int k, int j) { return c_[static_cast<std::size_t>(k) * grid_.Nz + j]; }
    std::complex<double> operator()(int k, int j) const { return c_[static_cast<std::size_t>(k) * grid_.Nz + j]; }
    std::complex<double>* data() { return c_.data(); }
    const std::complex<double>* data() const { return c_.data(); }
    /// Contiguous z-column of mode k.
    std::complex<double>* column(int k) { return c_.data() + static_cast<std::size_t>(k) * grid_.Nz; }

private:
    Grid grid_;
    std::vector<std::complex<double>> c_;
};

Spectrum forward_x(const ScalarField& f);
ScalarField inverse_x(const Spectrum& s);

/// Zeroes every mode with k > kmax.
void truncate_modes(Spectrum& s, int kmax);

}  // namespace bsnq
