#include "spectral.hpp"

#include <cstring>
#include <stdexcept>

namespace myco {

Spectral2D::Spectral2D(std::size_t nx, std::size_t ny) : nx_(nx), ny_(ny), nk_(nx * (ny / 2 + 1)) {
    if (nx < 2 || ny < 2) throw std::invalid_argument("spectral grid too small");
    real_buf_ = fftw_alloc_real(nx_ * ny_);
    cplx_buf_ = fftw_alloc_complex(nk_);
    fwd_ = fftw_plan_dft_r2c_2d(static_cast<int>(nx_), static_cast<int>(ny_), real_buf_, cplx_buf_,
                                FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_2d(static_cast<int>(nx_), static_cast<int>(ny_), cplx_buf_, real_buf_,
                                FFTW_ESTIMATE);
    if (!fwd_ || !bwd_) throw std::runtime_error("fftw plan creation failed");
}

Spectral2D::~Spectral2D() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_buf_);
    fftw_free(cplx_buf_);
}

std::vector<std::complex<double>> Spectral2D::forward(const std::vector<double>& real) {
    if (real.size() != nx_ * ny_) throw std::invalid_argument("spectral forward: size mismatch");
    std::memcpy(real_buf_, real.data(), sizeof(double) * real.size());
    fftw_execute(fwd_);
    std::vector<std::complex<double>> out(nk_);
    std::memcpy(static_cast<void*>(out.data()), cplx_buf_, sizeof(fftw_complex) * nk_);
    return out;
}

std::vector<double> Spectral2D::inverse(const std::vector<std::complex<double>>& spec) {
    if (spec.size() != nk_) throw std::invalid_argument("spectral inverse: size mismatch");
    std::memcpy(cplx_buf_, static_cast<const void*>(spec.data()), sizeof(fftw_complex) * nk_);
    fftw_execute(bwd_);
    std::vector<double> out(nx_ * ny_);
    const double scale = 1.0 / static_cast<double>(nx_ * ny_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = real_buf_[i] * scale;
    return out;
}

double Spectral2D::freq_x(std::size_t ix, double h) const {
    const double n = static_cast<double>(nx_);
    const double k = ix <= nx_ / 2 ? static_cast<double>(ix) : static_cast<double>(ix) - n;
    return k / (n * h);
}

double Spectral2D::freq_y(std::size_t iy, double h) const {
    const double n = static_cast<double>(ny_);
    const double k = iy <= ny_ / 2 ? static_cast<double>(iy) : static_cast<double>(iy) - n;
    return k / (n * h);
}

std::size_t next_fast_size(std::size_t n) {
    auto smooth = [](std::size_t v) {
        for (std::size_t p : {2, 3, 5})
            while (v % p == 0) v /= p;
        return v == 1;
    };
    while (!smooth(n)) ++n;
    return n;
}

}  // namespace myco
