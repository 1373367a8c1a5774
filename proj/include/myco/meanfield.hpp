#pragma once

#include <complex>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "myco/kernels.hpp"
#include "myco/vec2.hpp"

namespace myco {

class Spectral2D;

// Cell-centered rectangular grid on [-extent, extent]^2 with spacing h.
struct GridSpec {
    double extent = 5.0;
    double h = 0.05;

    std::size_t n() const { return static_cast<std::size_t>(std::llround(2.0 * extent / h)); }
    double x_of(std::size_t i) const { return -extent + (static_cast<double>(i) + 0.5) * h; }
    std::size_t index(std::size_t i, std::size_t j) const { return i * n() + j; }
    double cell_area() const { return h * h; }
};

// Gridded density rho_t plus its running time integral (the b2 memory term).
struct DensityField {
    GridSpec grid;
    double t = 0.0;
    std::vector<double> rho;  // node-major [ix][iy]
    std::vector<double> cum;  // int_0^t rho_s ds at each node

    explicit DensityField(GridSpec g)
        : grid(g), rho(g.n() * g.n(), 0.0), cum(g.n() * g.n(), 0.0) {}
    double mass() const;
};

struct VelocityField {
    std::vector<double> vx, vy;
    double max_abs() const;  // largest component magnitude
    double max_l1() const;   // largest |vx| + |vy| (the donor-cell CFL measure)
};

struct MeanFieldConfig {
    ModelSpec model;
    GridSpec grid;
    double dt = 1e-3;
    double horizon = 1.0;
    std::size_t ring_stride = 1;      // PDE steps between stored memory slices
    std::size_t ring_capacity = 0;    // 0: retain whatever tau_mem needs
    std::size_t snapshot_stride = 100;
    double pad = -1.0;                // physical pad width for the spectral grid; <0: auto
    double leak_threshold = 0.05;     // abort when leaked mass / initial mass exceeds this
    double kde_bandwidth = 0.0;       // smoothing of atom initial data; 0: 2h
    std::optional<std::vector<Vec2>> init_atoms;  // smooth these instead of the model sampler

    void validate() const;
};

struct StepMonitors {
    double t = 0.0;        // time after the step
    double mass = 0.0;     // h^2 sum rho after the step
    double leak = 0.0;     // mass lost in the heat pad this step
    double flux = 0.0;     // mass advected through the domain boundary this step
    double clip = 0.0;     // negative mass clipped to zero this step
    double reaction = 0.0; // mass added by the reaction term this step
    double residual = 0.0; // discrete mass identity residual this step
};

struct MeanFieldResult {
    GridSpec grid;
    std::vector<double> snapshot_times;
    std::vector<std::vector<double>> snapshots;  // rho at each snapshot time
    std::vector<StepMonitors> monitors;          // one row per PDE step
    double total_leak = 0.0;
    double total_clip = 0.0;
    std::uint64_t model_hash = 0;  // set by callers that carry a config hash
};

// thrown by transport_step when max|V| dt > h; evolve reacts by substepping
struct CflViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operator-splitting solver for the limit density equation
//   drho/dt + div(rho V) = (sigma^2/2) Lap rho + (b1 - d(x, rho)) rho + b2 * int_0^t rho,
//   V(t,x)  = int_0^t (L_{t-s} * rho_s)(x) ds,
// on a truncated zero-Dirichlet domain with explicit leak accounting. The heat
// step applies the exact Gaussian semigroup spectrally on a padded grid; the
// memory convolutions reuse the same spectral workspace.
class MeanFieldSolver {
public:
    explicit MeanFieldSolver(MeanFieldConfig config);
    ~MeanFieldSolver();

    const MeanFieldConfig& config() const { return config_; }

    // build rho_0 from the model's initial condition (analytic density, or
    // Gaussian smoothing at the KDE bandwidth for atom data)
    DensityField initial_field() const;

    // V(t, .) = sum_j w_j (L_{t - t_j} * rho_{t_j}), trapezoid over the ring
    // plus the current slice; zero field when the history is empty
    VelocityField memory_velocity(const DensityField& field) const;

    // exact Gaussian convolution with variance sigma^2 dt per axis; returns
    // the mass lost to the pad
    double heat_step(DensityField& field, double sigma, double dt) const;

    // conservative first-order upwind update of d(rho)/dt + div(rho V) = 0;
    // returns the mass advected out through the domain boundary
    double transport_step(DensityField& field, const VelocityField& v, double dt) const;

    // node-wise reaction rho += dt ((b1 - d) rho + b2 * cum), then the
    // trapezoidal cumulative update and positivity clip;
    // returns {mass added by reaction, mass added by clipping}
    std::pair<double, double> reaction_step(DensityField& field, double dt) const;

    // full loop heat -> transport -> reaction with ring-buffer memory
    MeanFieldResult evolve();

    // store a slice into the memory ring (evolve does this automatically;
    // public so histories can be seeded when driving the steps manually)
    void push_memory_slice(const DensityField& field, long step);

    // what the ring currently covers (oldest stored slice time)
    double ring_oldest() const;

private:
    struct Slice {
        double t = 0.0;
        long step = 0;
        std::vector<std::complex<double>> spectrum;  // padded FFT of rho
    };

    MeanFieldConfig config_;
    std::size_t n_;        // interior nodes per axis
    std::size_t pad_;      // pad nodes per side
    std::size_t np_;       // padded axis size
    std::unique_ptr<Spectral2D> fft_;
    std::vector<double> b1_grid_, b2_grid_;
    // spatial part of the preset kernel / tabulated kernel spectra per lag step
    mutable std::vector<std::vector<std::complex<double>>> preset_spectrum_;  // [component]
    mutable std::vector<std::pair<long, std::vector<std::vector<std::complex<double>>>>> table_cache_;
    std::vector<std::complex<double>> death_bump_spectrum_;
    mutable std::deque<Slice> ring_;

    std::vector<double> embed(const std::vector<double>& interior) const;
    void extract_into(const std::vector<double>& padded, std::vector<double>& interior) const;
    std::vector<std::complex<double>> padded_spectrum(const std::vector<double>& interior) const;
    const std::vector<std::vector<std::complex<double>>>& kernel_spectrum(long lag_steps) const;
    std::vector<double> death_field(const DensityField& field) const;
    void push_slice(const DensityField& field, long step) const;
    void prune_ring(double t) const;
};

}  // namespace myco
