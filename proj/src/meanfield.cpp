#include "myco/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spectral.hpp"

namespace myco {

double DensityField::mass() const {
    // compensated sum: the mass identity monitors difference this at 1e-12
    double acc = 0.0, carry = 0.0;
    for (double v : rho) {
        const double y = v - carry;
        const double t = acc + y;
        carry = (t - acc) - y;
        acc = t;
    }
    return acc * grid.cell_area();
}

double VelocityField::max_abs() const {
    double m = 0.0;
    for (double v : vx) m = std::max(m, std::abs(v));
    for (double v : vy) m = std::max(m, std::abs(v));
    return m;
}

double VelocityField::max_l1() const {
    double m = 0.0;
    for (std::size_t i = 0; i < vx.size(); ++i)
        m = std::max(m, std::abs(vx[i]) + std::abs(vy[i]));
    return m;
}

void MeanFieldConfig::validate() const {
    if (dt <= 0.0) throw std::invalid_argument("meanfield config: dt must be > 0");
    if (horizon <= 0.0) throw std::invalid_argument("meanfield config: horizon must be > 0");
    if (grid.h <= 0.0 || grid.extent <= 0.0 || grid.n() < 4)
        throw std::invalid_argument("meanfield config: degenerate grid");
    if (ring_stride == 0) throw std::invalid_argument("meanfield config: ring stride must be >= 1");
    if (snapshot_stride == 0)
        throw std::invalid_argument("meanfield config: snapshot stride must be >= 1");
    // the grid must cover the initial condition's effective support
    const auto& init = model.initial;
    double reach = 0.0;
    switch (init.form) {
        case InitialCondition::Form::Gaussian:
            reach = (init.center.norm() + 2.0 * init.width);
            break;
        case InitialCondition::Form::UniformDisc:
            reach = init.center.norm() + init.radius;
            break;
        case InitialCondition::Form::Point:
            reach = init.center.norm();
            break;
        case InitialCondition::Form::Atoms:
            for (const Vec2& a : init.atoms) reach = std::max(reach, a.norm());
            break;
    }
    if (init_atoms)
        for (const Vec2& a : *init_atoms) reach = std::max(reach, a.norm());
    if (reach > grid.extent)
        throw std::invalid_argument("meanfield config: grid does not cover the initial condition");
}

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

MeanFieldSolver::MeanFieldSolver(MeanFieldConfig config) : config_(std::move(config)) {
    config_.validate();
    n_ = config_.grid.n();
    double pad_len = config_.pad;
    if (pad_len < 0.0) {
        // enough room for the heat reach per step and the interaction kernel
        double reach = 8.0 * config_.model.sigma * std::sqrt(config_.dt);
        if (config_.model.kernel.family() == InteractionKernel::Family::ExpGaussian)
            reach = std::max(reach, 6.0 * config_.model.kernel.width());
        if (config_.model.kernel.family() == InteractionKernel::Family::Table)
            reach = std::max(reach, config_.model.kernel.table_reach());
        if (config_.model.death.form() == DeathRate::Form::Convolution)
            reach = std::max(reach, 6.0 * config_.model.death.width());
        pad_len = std::max(reach, 4.0 * config_.grid.h);
    }
    pad_ = static_cast<std::size_t>(std::ceil(pad_len / config_.grid.h));
    np_ = next_fast_size(n_ + 2 * pad_);
    fft_ = std::make_unique<Spectral2D>(np_, np_);

    b1_grid_.resize(n_ * n_);
    b2_grid_.resize(n_ * n_);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j) {
            const Vec2 x{config_.grid.x_of(i), config_.grid.x_of(j)};
            b1_grid_[config_.grid.index(i, j)] = config_.model.rates.b1(x);
            b2_grid_[config_.grid.index(i, j)] = config_.model.rates.b2(x);
        }

    const double h = config_.grid.h;
    auto offset_of = [&](std::size_t i) {
        return (i <= np_ / 2 ? static_cast<double>(i) : static_cast<double>(i) - static_cast<double>(np_)) * h;
    };
    if (config_.model.kernel.family() == InteractionKernel::Family::ExpGaussian) {
        // lag-independent spatial profile k(x) = sign * x exp(-|x|^2 / 2w^2)
        const double w2 = config_.model.kernel.width() * config_.model.kernel.width();
        const double sign = config_.model.kernel.attracting() ? -1.0 : 1.0;
        std::vector<double> kx(np_ * np_), ky(np_ * np_);
        for (std::size_t i = 0; i < np_; ++i)
            for (std::size_t j = 0; j < np_; ++j) {
                const double ox = offset_of(i), oy = offset_of(j);
                const double m = sign * std::exp(-(ox * ox + oy * oy) / (2.0 * w2));
                kx[i * np_ + j] = m * ox;
                ky[i * np_ + j] = m * oy;
            }
        preset_spectrum_.push_back(fft_->forward(kx));
        preset_spectrum_.push_back(fft_->forward(ky));
    }
    if (config_.model.death.form() == DeathRate::Form::Convolution) {
        std::vector<double> phi(np_ * np_);
        for (std::size_t i = 0; i < np_; ++i)
            for (std::size_t j = 0; j < np_; ++j) {
                const double ox = offset_of(i), oy = offset_of(j);
                phi[i * np_ + j] = config_.model.death.bump(ox * ox + oy * oy);
            }
        death_bump_spectrum_ = fft_->forward(phi);
    }
}

MeanFieldSolver::~MeanFieldSolver() = default;

// ---- field construction -------------------------------------------------------

DensityField MeanFieldSolver::initial_field() const {
    DensityField f(config_.grid);
    const auto& init = config_.model.initial;
    const double N = static_cast<double>(config_.model.scale_N);

    auto smooth_atoms = [&](const std::vector<Vec2>& atoms) {
        const double bw = config_.kde_bandwidth > 0.0 ? config_.kde_bandwidth : 2.0 * config_.grid.h;
        const double inv2b2 = 1.0 / (2.0 * bw * bw);
        const double norm = 1.0 / (2.0 * kPi * bw * bw * N);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) {
                const Vec2 x{config_.grid.x_of(i), config_.grid.x_of(j)};
                double acc = 0.0;
                for (const Vec2& a : atoms) acc += std::exp(-(x - a).norm2() * inv2b2);
                f.rho[config_.grid.index(i, j)] = acc * norm;
            }
    };

    if (config_.init_atoms) {
        smooth_atoms(*config_.init_atoms);
    } else if (init.has_density()) {
        const double m0 = static_cast<double>(init.count) / N;
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) {
                const Vec2 x{config_.grid.x_of(i), config_.grid.x_of(j)};
                f.rho[config_.grid.index(i, j)] = m0 * init.density(x);
            }
    } else if (init.form == InitialCondition::Form::Point) {
        smooth_atoms(std::vector<Vec2>(init.count, init.center));
    } else {
        smooth_atoms(init.atoms);
    }
    return f;
}

std::vector<double> MeanFieldSolver::embed(const std::vector<double>& interior) const {
    std::vector<double> padded(np_ * np_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j)
            padded[(i + pad_) * np_ + (j + pad_)] = interior[i * n_ + j];
    return padded;
}

void MeanFieldSolver::extract_into(const std::vector<double>& padded,
                                   std::vector<double>& interior) const {
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j)
            interior[i * n_ + j] = padded[(i + pad_) * np_ + (j + pad_)];
}

std::vector<std::complex<double>> MeanFieldSolver::padded_spectrum(
    const std::vector<double>& interior) const {
    return fft_->forward(embed(interior));
}

// ---- memory convolution ---------------------------------------------------------

const std::vector<std::vector<std::complex<double>>>& MeanFieldSolver::kernel_spectrum(
    long lag_steps) const {
    // tabulated kernels only; cached per discrete lag
    for (const auto& [key, val] : table_cache_)
        if (key == lag_steps) return val;
    const double lag = static_cast<double>(lag_steps) * config_.dt;
    const double h = config_.grid.h;
    auto offset_of = [&](std::size_t i) {
        return (i <= np_ / 2 ? static_cast<double>(i) : static_cast<double>(i) - static_cast<double>(np_)) * h;
    };
    std::vector<double> lx(np_ * np_), ly(np_ * np_);
    for (std::size_t i = 0; i < np_; ++i)
        for (std::size_t j = 0; j < np_; ++j) {
            const Vec2 v = config_.model.kernel.eval(lag, Vec2{offset_of(i), offset_of(j)});
            lx[i * np_ + j] = v.x;
            ly[i * np_ + j] = v.y;
        }
    std::vector<std::vector<std::complex<double>>> spec;
    spec.push_back(fft_->forward(lx));
    spec.push_back(fft_->forward(ly));
    table_cache_.emplace_back(lag_steps, std::move(spec));
    return table_cache_.back().second;
}

VelocityField MeanFieldSolver::memory_velocity(const DensityField& field) const {
    VelocityField v;
    v.vx.assign(n_ * n_, 0.0);
    v.vy.assign(n_ * n_, 0.0);
    const auto& K = config_.model.kernel;
    if (K.is_zero()) return v;

    // quadrature nodes: retained slices within the memory horizon, then the
    // current field as the lag-zero node
    const double t = field.t;
    const double lo = std::isfinite(K.tau_mem()) ? std::max(0.0, t - K.tau_mem()) : 0.0;
    struct Node {
        double t;
        long step;
        const std::vector<std::complex<double>>* spectrum;
    };
    std::vector<Node> nodes;
    for (const Slice& s : ring_)
        if (s.t >= lo - 1e-12 && s.t < t - 1e-12) nodes.push_back({s.t, s.step, &s.spectrum});
    const long cur_step = static_cast<long>(std::llround(t / config_.dt));
    std::vector<std::complex<double>> cur_spec = padded_spectrum(field.rho);
    nodes.push_back({t, cur_step, &cur_spec});
    if (nodes.size() < 2) return v;  // zero-length time integral

    if (config_.ring_capacity != 0 && nodes.front().t > lo + config_.dt * (config_.ring_stride + 1))
        throw std::runtime_error(
            "memory ring underflow: capped buffer no longer covers [t - tau_mem, t]");

    std::vector<std::complex<double>> accx(fft_->nk(), {0.0, 0.0});
    std::vector<std::complex<double>> accy(fft_->nk(), {0.0, 0.0});
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        double w = 0.0;  // trapezoid weight over nonuniform node times
        if (a > 0) w += 0.5 * (nodes[a].t - nodes[a - 1].t);
        if (a + 1 < nodes.size()) w += 0.5 * (nodes[a + 1].t - nodes[a].t);
        if (w <= 0.0) continue;
        const double lag = t - nodes[a].t;
        if (K.family() == InteractionKernel::Family::ExpGaussian) {
            const double amp = w * K.amplitude() * std::exp(-K.lambda() * lag);
            const auto& rho_hat = *nodes[a].spectrum;
            for (std::size_t k = 0; k < accx.size(); ++k) {
                accx[k] += amp * preset_spectrum_[0][k] * rho_hat[k];
                accy[k] += amp * preset_spectrum_[1][k] * rho_hat[k];
            }
        } else {
            const auto& ks = kernel_spectrum(cur_step - nodes[a].step);
            const auto& rho_hat = *nodes[a].spectrum;
            for (std::size_t k = 0; k < accx.size(); ++k) {
                accx[k] += w * ks[0][k] * rho_hat[k];
                accy[k] += w * ks[1][k] * rho_hat[k];
            }
        }
    }
    const double area = config_.grid.cell_area();
    std::vector<double> px = fft_->inverse(accx);
    std::vector<double> py = fft_->inverse(accy);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j) {
            v.vx[i * n_ + j] = area * px[(i + pad_) * np_ + (j + pad_)];
            v.vy[i * n_ + j] = area * py[(i + pad_) * np_ + (j + pad_)];
        }
    return v;
}

// ---- split steps -----------------------------------------------------------------

double MeanFieldSolver::heat_step(DensityField& field, double sigma, double dt) const {
    if (dt <= 0.0) throw std::invalid_argument("heat_step: dt must be > 0");
    if (sigma == 0.0) return 0.0;
    const double mass_before = field.mass();
    std::vector<std::complex<double>> spec = padded_spectrum(field.rho);
    const double var = sigma * sigma * dt;
    const double h = config_.grid.h;
    const std::size_t nyk = np_ / 2 + 1;
    for (std::size_t i = 0; i < np_; ++i) {
        const double fx = fft_->freq_x(i, h);
        for (std::size_t j = 0; j < nyk; ++j) {
            const double fy = fft_->freq_y(j, h);
            // exact semigroup multiplier exp(-sigma^2 dt |2 pi f|^2 / 2)
            const double k2 = 4.0 * kPi * kPi * (fx * fx + fy * fy);
            spec[i * nyk + j] *= std::exp(-0.5 * var * k2);
        }
    }
    std::vector<double> padded = fft_->inverse(spec);
    extract_into(padded, field.rho);
    return mass_before - field.mass();
}

double MeanFieldSolver::transport_step(DensityField& field, const VelocityField& v,
                                       double dt) const {
    if (dt <= 0.0) throw std::invalid_argument("transport_step: dt must be > 0");
    const double h = config_.grid.h;
    // donor-cell stability needs the l1 speed, which dominates |V|
    const double vmax = v.max_l1();
    if (vmax * dt > h)
        throw CflViolation("transport CFL violated: max|V| dt = " + std::to_string(vmax * dt) +
                           " > h = " + std::to_string(h));
    const std::vector<double>& rho = field.rho;
    std::vector<double> out(rho.size());
    double boundary = 0.0;  // outward flux, mass units

    auto upwind = [](double u, double left, double right) {
        return u >= 0.0 ? u * left : u * right;
    };
    const double lam = dt / h;
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
            const std::size_t c = i * n_ + j;
            // x faces: between (i-1,j)-(i,j) and (i,j)-(i+1,j); outside is vacuum
            double f_w, f_e, f_s, f_n;
            if (i == 0) {
                f_w = upwind(v.vx[c], 0.0, rho[c]);
            } else {
                const std::size_t l = (i - 1) * n_ + j;
                f_w = upwind(0.5 * (v.vx[l] + v.vx[c]), rho[l], rho[c]);
            }
            if (i + 1 == n_) {
                f_e = upwind(v.vx[c], rho[c], 0.0);
            } else {
                const std::size_t r = (i + 1) * n_ + j;
                f_e = upwind(0.5 * (v.vx[c] + v.vx[r]), rho[c], rho[r]);
            }
            if (j == 0) {
                f_s = upwind(v.vy[c], 0.0, rho[c]);
            } else {
                f_s = upwind(0.5 * (v.vy[c - 1] + v.vy[c]), rho[c - 1], rho[c]);
            }
            if (j + 1 == n_) {
                f_n = upwind(v.vy[c], rho[c], 0.0);
            } else {
                f_n = upwind(0.5 * (v.vy[c] + v.vy[c + 1]), rho[c], rho[c + 1]);
            }
            out[c] = rho[c] - lam * (f_e - f_w + f_n - f_s);
            if (i == 0 && f_w < 0.0) boundary -= f_w;
            if (i + 1 == n_ && f_e > 0.0) boundary += f_e;
            if (j == 0 && f_s < 0.0) boundary -= f_s;
            if (j + 1 == n_ && f_n > 0.0) boundary += f_n;
        }
    }
    field.rho.swap(out);
    return boundary * dt * h;  // face flux * dt * face length
}

std::vector<double> MeanFieldSolver::death_field(const DensityField& field) const {
    const auto& death = config_.model.death;
    switch (death.form()) {
        case DeathRate::Form::Zero:
            return std::vector<double>(n_ * n_, 0.0);
        case DeathRate::Form::TotalMass:
            return std::vector<double>(n_ * n_, death.gamma() * field.mass());
        case DeathRate::Form::Convolution: {
            std::vector<std::complex<double>> spec = padded_spectrum(field.rho);
            for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= death_bump_spectrum_[k];
            std::vector<double> padded = fft_->inverse(spec);
            std::vector<double> out(n_ * n_);
            extract_into(padded, out);
            const double scale = death.gamma() * config_.grid.cell_area();
            for (double& v : out) v *= scale;
            return out;
        }
    }
    return {};
}

std::pair<double, double> MeanFieldSolver::reaction_step(DensityField& field, double dt) const {
    if (dt <= 0.0) throw std::invalid_argument("reaction_step: dt must be > 0");
    const std::vector<double> d = death_field(field);
    const std::vector<double> rho_pre = field.rho;
    double reaction_mass = 0.0;
    double clip_mass = 0.0;
    const double area = config_.grid.cell_area();
    for (std::size_t c = 0; c < field.rho.size(); ++c) {
        const double inc = dt * ((b1_grid_[c] - d[c]) * rho_pre[c] + b2_grid_[c] * field.cum[c]);
        reaction_mass += inc;
        double next = rho_pre[c] + inc;
        if (next < 0.0) {
            clip_mass -= next;
            next = 0.0;
        }
        field.rho[c] = next;
    }
    // trapezoidal cumulative update: half-weight on the new slice
    for (std::size_t c = 0; c < field.rho.size(); ++c)
        field.cum[c] += 0.5 * dt * (rho_pre[c] + field.rho[c]);
    return {reaction_mass * area, clip_mass * area};
}

// ---- evolve ------------------------------------------------------------------------

void MeanFieldSolver::push_slice(const DensityField& field, long step) const {
    ring_.push_back({field.t, step, padded_spectrum(field.rho)});
    if (config_.ring_capacity != 0)
        while (ring_.size() > config_.ring_capacity) ring_.pop_front();
}

void MeanFieldSolver::push_memory_slice(const DensityField& field, long step) {
    push_slice(field, step);
}

void MeanFieldSolver::prune_ring(double t) const {
    const double tau = config_.model.kernel.tau_mem();
    if (!std::isfinite(tau)) return;
    const double margin = config_.dt * static_cast<double>(config_.ring_stride);
    while (ring_.size() > 1 && ring_[1].t <= t - tau - margin) ring_.pop_front();
}

double MeanFieldSolver::ring_oldest() const { return ring_.empty() ? 0.0 : ring_.front().t; }

MeanFieldResult MeanFieldSolver::evolve() {
    MeanFieldResult result;
    result.grid = config_.grid;
    DensityField field = initial_field();
    const double initial_mass = field.mass();
    const bool has_kernel = !config_.model.kernel.is_zero();

    ring_.clear();
    if (has_kernel) push_slice(field, 0);
    result.snapshot_times.push_back(0.0);
    result.snapshots.push_back(field.rho);

    const std::size_t n_steps =
        static_cast<std::size_t>(std::ceil(config_.horizon / config_.dt - 1e-12));
    for (std::size_t step = 1; step <= n_steps; ++step) {
        const double t_next = std::min(config_.horizon, static_cast<double>(step) * config_.dt);
        const double dt = t_next - field.t;
        if (dt <= 0.0) continue;
        const double mass_before = field.mass();

        VelocityField vel;
        if (has_kernel) vel = memory_velocity(field);

        const double leak = heat_step(field, config_.model.sigma, dt);

        double flux = 0.0;
        if (has_kernel) {
            // substep the advection if the velocity outruns the CFL budget
            const double vmax = vel.max_l1();
            const std::size_t nsub = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::ceil(vmax * dt / (0.9 * config_.grid.h))));
            for (std::size_t s = 0; s < nsub; ++s)
                flux += transport_step(field, vel, dt / static_cast<double>(nsub));
        }

        const auto [reaction_mass, clip_mass] = reaction_step(field, dt);
        field.t = t_next;

        StepMonitors mon;
        mon.t = t_next;
        mon.mass = field.mass();
        mon.leak = leak;
        mon.flux = flux;
        mon.clip = clip_mass;
        mon.reaction = reaction_mass;
        mon.residual = mon.mass - (mass_before - leak - flux + reaction_mass + clip_mass);
        result.monitors.push_back(mon);
        result.total_leak += leak + flux;
        result.total_clip += clip_mass;

        if (initial_mass > 0.0 && result.total_leak > config_.leak_threshold * initial_mass)
            throw std::runtime_error("meanfield: leaked mass exceeds threshold (domain too small): " +
                                     std::to_string(result.total_leak / initial_mass));

        if (has_kernel) {
            prune_ring(t_next);
            if (step % config_.ring_stride == 0) push_slice(field, static_cast<long>(step));
        }
        if (step % config_.snapshot_stride == 0 || step == n_steps) {
            result.snapshot_times.push_back(t_next);
            result.snapshots.push_back(field.rho);
        }
    }
    return result;
}

}  // namespace myco
