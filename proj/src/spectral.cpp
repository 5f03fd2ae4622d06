#include "qt/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace qt {

void Grid::validate() const {
    auto pow2 = [](int n) { return n >= 4 && (n & (n - 1)) == 0; };
    if (!pow2(nx) || !pow2(ny)) throw std::invalid_argument("grid sizes must be powers of two >= 4");
    if (!(lx > 0 && ly > 0)) throw std::invalid_argument("box lengths must be positive");
}

Spectral::Spectral(const Grid& g) : grid_(g) {
    grid_.validate();
    const int nx = g.nx, ny = g.ny, nyc = ny / 2 + 1;
    kx_.resize(spectral_size());
    ky_.resize(spectral_size());
    for (int i = 0; i < nx; ++i) {
        const int mi = (i <= nx / 2) ? i : i - nx;
        const double kx = (i == nx / 2) ? 0.0 : 2.0 * std::numbers::pi * mi / g.lx;
        for (int j = 0; j < nyc; ++j) {
            const double ky = (j == ny / 2) ? 0.0 : 2.0 * std::numbers::pi * j / g.ly;
            kx_[static_cast<std::size_t>(i) * nyc + j] = kx;
            ky_[static_cast<std::size_t>(i) * nyc + j] = ky;
        }
    }
    rbuf_ = fftw_alloc_real(g.size());
    cbuf_ = fftw_alloc_complex(spectral_size());
    auto* c = static_cast<fftw_complex*>(cbuf_);
    // FFTW_ESTIMATE keeps the chosen algorithm, and therefore the bits, identical across runs.
    plan_f_ = fftw_plan_dft_r2c_2d(nx, ny, rbuf_, c, FFTW_ESTIMATE);
    plan_b_ = fftw_plan_dft_c2r_2d(nx, ny, c, rbuf_, FFTW_ESTIMATE);
}

Spectral::~Spectral() {
    fftw_destroy_plan(static_cast<fftw_plan>(plan_f_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_b_));
    fftw_free(rbuf_);
    fftw_free(cbuf_);
}

void Spectral::forward(const double* in, cplx* out) const {
    std::memcpy(rbuf_, in, grid_.size() * sizeof(double));
    fftw_execute(static_cast<fftw_plan>(plan_f_));
    std::memcpy(static_cast<void*>(out), cbuf_, spectral_size() * sizeof(cplx));
}

void Spectral::backward(const cplx* in, double* out) const {
    std::memcpy(cbuf_, in, spectral_size() * sizeof(cplx));
    fftw_execute(static_cast<fftw_plan>(plan_b_));
    const double s = 1.0 / static_cast<double>(grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i) out[i] = rbuf_[i] * s;
}

void Spectral::gradient(const double* in, double* dx, double* dy) const {
    std::vector<cplx> f(spectral_size()), g(spectral_size());
    forward(in, f.data());
    const cplx I(0.0, 1.0);
    for (std::size_t k = 0; k < f.size(); ++k) g[k] = I * kx_[k] * f[k];
    backward(g.data(), dx);
    for (std::size_t k = 0; k < f.size(); ++k) g[k] = I * ky_[k] * f[k];
    backward(g.data(), dy);
}

}  // namespace qt
