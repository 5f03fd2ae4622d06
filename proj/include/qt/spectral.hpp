#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace qt {

struct Grid {
    int nx = 64, ny = 64;
    double lx = 1.0, ly = 1.0;

    std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
    double cell_area() const { return lx * ly / static_cast<double>(size()); }
    double x(int i) const { return lx * i / nx; }
    double y(int j) const { return ly * j / ny; }
    // Throws std::invalid_argument unless nx, ny are powers of two >= 4 and lengths positive.
    void validate() const;
};

using cplx = std::complex<double>;

// Real 2D periodic transforms (row-major, x slow, y fast) through FFTW.
// Derivative symbols use i k with the Nyquist wavenumber set to zero, so the discrete
// gradient is exactly skew-adjoint and the Laplacian equals -(kx^2 + ky^2) with the same k.
class Spectral {
public:
    explicit Spectral(const Grid& g);
    ~Spectral();
    Spectral(const Spectral&) = delete;
    Spectral& operator=(const Spectral&) = delete;

    const Grid& grid() const { return grid_; }
    std::size_t spectral_size() const { return static_cast<std::size_t>(grid_.nx) * (grid_.ny / 2 + 1); }
    double kx(std::size_t idx) const { return kx_[idx]; }
    double ky(std::size_t idx) const { return ky_[idx]; }

    void forward(const double* in, cplx* out) const;
    // Normalized inverse; the input is left untouched.
    void backward(const cplx* in, double* out) const;
    void gradient(const double* in, double* dx, double* dy) const;

private:
    Grid grid_;
    std::vector<double> kx_, ky_;
    void* plan_f_ = nullptr;
    void* plan_b_ = nullptr;
    double* rbuf_ = nullptr;
    void* cbuf_ = nullptr;
};

}  // namespace qt
