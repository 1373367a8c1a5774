#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <fftw3.h>

namespace myco {

// Real 2D FFT workspace of fixed padded size (row-major nx * ny, the y axis
// holds the halved complex dimension). Plans use FFTW_ESTIMATE so results are
// reproducible run to run.
class Spectral2D {
public:
    Spectral2D(std::size_t nx, std::size_t ny);
    ~Spectral2D();
    Spectral2D(const Spectral2D&) = delete;
    Spectral2D& operator=(const Spectral2D&) = delete;

    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }
    std::size_t nk() const { return nk_; }  // complex entries per field: nx * (ny/2 + 1)

    std::vector<std::complex<double>> forward(const std::vector<double>& real);
    // inverse including the 1/(nx*ny) normalisation
    std::vector<double> inverse(const std::vector<std::complex<double>>& spec);

    // signed frequency (cycles per unit length) of row ix / column iy at spacing h
    double freq_x(std::size_t ix, double h) const;
    double freq_y(std::size_t iy, double h) const;

private:
    std::size_t nx_, ny_, nk_;
    double* real_buf_;
    fftw_complex* cplx_buf_;
    fftw_plan fwd_;
    fftw_plan bwd_;
};

// smallest 5-smooth integer >= n (good FFT sizes)
std::size_t next_fast_size(std::size_t n);

}  // namespace myco
