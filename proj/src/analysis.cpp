#include "myco/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace myco {

TestFunction TestFunction::constant(double value) {
    TestFunction f;
    f.type = Type::Constant;
    f.scale = value;
    f.name = "const";
    return f;
}

TestFunction TestFunction::gaussian(Vec2 center, double width, double amplitude) {
    if (width <= 0.0) throw std::invalid_argument("test function: width must be > 0");
    TestFunction f;
    f.type = Type::Gaussian;
    f.center = center;
    f.width = width;
    f.scale = amplitude;
    f.name = "gauss";
    return f;
}

TestFunction TestFunction::coordinate(int axis, double cutoff) {
    if (axis != 0 && axis != 1) throw std::invalid_argument("test function: axis must be 0 or 1");
    if (cutoff <= 0.0) throw std::invalid_argument("test function: cutoff must be > 0");
    TestFunction f;
    f.type = Type::Coordinate;
    f.axis = axis;
    f.cutoff = cutoff;
    f.name = axis == 0 ? "x_cut" : "y_cut";
    return f;
}

namespace {

// quintic taper: 1 on [0, R], 0 beyond 2R, C^2 everywhere
struct Taper {
    double chi, dchi, d2chi;
};

Taper taper(double r, double R) {
    if (r <= R) return {1.0, 0.0, 0.0};
    if (r >= 2.0 * R) return {0.0, 0.0, 0.0};
    const double s = (r - R) / R;
    const double s2 = s * s, s3 = s2 * s;
    return {1.0 - (10.0 * s3 - 15.0 * s3 * s + 6.0 * s3 * s2),
            -(30.0 * s2 - 60.0 * s3 + 30.0 * s2 * s2) / R,
            -(60.0 * s - 180.0 * s2 + 120.0 * s3) / (R * R)};
}

}  // namespace

double TestFunction::value(const Vec2& x) const {
    switch (type) {
        case Type::Constant:
            return scale;
        case Type::Gaussian:
            return scale * std::exp(-(x - center).norm2() / (2.0 * width * width));
        case Type::Coordinate: {
            const double r = x.norm();
            const double xi = axis == 0 ? x.x : x.y;
            return xi * taper(r, cutoff).chi;
        }
    }
    return 0.0;
}

Vec2 TestFunction::gradient(const Vec2& x) const {
    switch (type) {
        case Type::Constant:
            return {0.0, 0.0};
        case Type::Gaussian: {
            const double f = value(x);
            const double iw2 = 1.0 / (width * width);
            return {-f * (x.x - center.x) * iw2, -f * (x.y - center.y) * iw2};
        }
        case Type::Coordinate: {
            const double r = x.norm();
            const double xi = axis == 0 ? x.x : x.y;
            const Taper tp = taper(r, cutoff);
            if (r < 1e-12) return axis == 0 ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
            Vec2 g{tp.dchi * xi * x.x / r, tp.dchi * xi * x.y / r};
            if (axis == 0)
                g.x += tp.chi;
            else
                g.y += tp.chi;
            return g;
        }
    }
    return {0.0, 0.0};
}

Vec2 TestFunction::hessian_diag(const Vec2& x) const {
    switch (type) {
        case Type::Constant:
            return {0.0, 0.0};
        case Type::Gaussian: {
            const double f = value(x);
            const double iw2 = 1.0 / (width * width);
            const double dx = x.x - center.x, dy = x.y - center.y;
            return {f * (dx * dx * iw2 * iw2 - iw2), f * (dy * dy * iw2 * iw2 - iw2)};
        }
        case Type::Coordinate: {
            const double r = x.norm();
            if (r < 1e-12) return {0.0, 0.0};
            const double xi = axis == 0 ? x.x : x.y;
            const Taper tp = taper(r, cutoff);
            auto second = [&](double xj, bool diag_axis) {
                double v = xi * (tp.d2chi * xj * xj / (r * r) +
                                 tp.dchi * (r * r - xj * xj) / (r * r * r));
                if (diag_axis) v += 2.0 * tp.dchi * xj / r;
                return v;
            };
            return {second(x.x, axis == 0), second(x.y, axis == 1)};
        }
    }
    return {0.0, 0.0};
}

double TestFunction::sup_norm() const {
    switch (type) {
        case Type::Constant:
            return std::abs(scale);
        case Type::Gaussian:
            return std::abs(scale);
        case Type::Coordinate:
            return 2.0 * cutoff;
    }
    return 0.0;
}

TestFunctionDictionary TestFunctionDictionary::standard(double extent) {
    TestFunctionDictionary d;
    d.functions.push_back(TestFunction::constant(1.0));
    d.functions.push_back(TestFunction::gaussian({0.0, 0.0}, extent / 3.0));
    d.functions.push_back(TestFunction::gaussian({extent / 2.0, 0.0}, extent / 4.0));
    d.functions.push_back(TestFunction::coordinate(0, extent));
    d.functions.push_back(TestFunction::coordinate(1, extent));
    return d;
}

double pairing(const Snapshot& snapshot, const TestFunction& f, double scale_N) {
    double acc = 0.0;
    for (const Vec2& p : snapshot.positions) acc += f.value(p);
    return acc / scale_N;
}

double pairing(const std::vector<double>& rho, const GridSpec& grid, const TestFunction& f) {
    const std::size_t n = grid.n();
    if (rho.size() != n * n) throw std::invalid_argument("pairing: field size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            acc += f.value(Vec2{grid.x_of(i), grid.x_of(j)}) * rho[grid.index(i, j)];
    return acc * grid.cell_area();
}

std::vector<double> martingale_residual(const RunResult& result, const TestFunction& f,
                                        const ModelSpec& model) {
    const auto& snaps = result.snapshots;
    if (snaps.empty()) throw std::invalid_argument("martingale_residual: no snapshots");
    const double N = static_cast<double>(model.scale_N);
    const std::size_t m = snaps.size();

    // per snapshot s: base_s = <Z_s, grad f . D + (sigma^2/2) Lap f + (b1 - d) f>
    //                 lin_s  = <Z_s, b2 f>  (weighted by (t - s) per horizon)
    std::vector<double> base(m, 0.0), lin(m, 0.0), paired(m, 0.0);
    const double half_sig2 = 0.5 * model.sigma * model.sigma;
    for (std::size_t k = 0; k < m; ++k) {
        const Snapshot& s = snaps[k];
        paired[k] = pairing(s, f, N);
        double b = 0.0, l = 0.0;
        // alive positions for the death rate at this snapshot
        const std::vector<Vec2>& pos = s.positions;
        for (std::size_t a = 0; a < s.labels.size(); ++a) {
            const Vec2& x = pos[a];
            double term = 0.0;
            if (!model.kernel.is_zero()) {
                const Vec2 drift =
                    history_drift_field(result.history, x, s.t, model.kernel, N);
                term += dot(f.gradient(x), drift);
            }
            const Vec2 hd = f.hessian_diag(x);
            term += half_sig2 * (hd.x + hd.y);
            const double d = model.death.is_zero() ? 0.0 : model.death.eval(x, pos, N);
            term += (model.rates.b1(x) - d) * f.value(x);
            b += term;
            l += model.rates.b2(x) * f.value(x);
        }
        base[k] = b / N;
        lin[k] = l / N;
    }

    // M_t per horizon, trapezoid over snapshot times <= t
    std::vector<double> out(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        const double t = snaps[k].t;
        double integral = 0.0;
        for (std::size_t a = 0; a + 1 <= k && a + 1 < m; ++a) {
            const double sa = snaps[a].t, sb = snaps[a + 1].t;
            const double fa = base[a] + (t - sa) * lin[a];
            const double fb = base[a + 1] + (t - sb) * lin[a + 1];
            integral += 0.5 * (fa + fb) * (sb - sa);
        }
        out[k] = paired[k] - paired[0] - integral;
    }
    return out;
}

bool MomentAudit::all_pass() const {
    for (const auto& r : rows)
        if (!r.mass_ok || !r.sup_sq_ok || !r.events_ok) return false;
    return true;
}

MomentAudit moment_audit(const ReplicaStats& stats, const ModelSpec& model) {
    if (stats.times.empty() || stats.counts.empty())
        throw std::invalid_argument("moment_audit: empty replica stats");
    MomentAudit audit;
    const double N = static_cast<double>(model.scale_N);
    const double B1 = model.rates.B1, B2 = model.rates.B2;

    // scaled initial moments (deterministic initial condition in all shipped
    // configs, but use the empirical replica means to be safe)
    double m0 = 0.0, m0sq = 0.0;
    for (std::size_t r = 0; r < stats.replicas(); ++r) {
        m0 += stats.counts[r][0] / N;
        m0sq += (stats.counts[r][0] / N) * (stats.counts[r][0] / N);
    }
    m0 /= static_cast<double>(stats.replicas());
    m0sq /= static_cast<double>(stats.replicas());

    const std::size_t nt = stats.times.size();
    std::vector<std::vector<double>> scaled(stats.replicas()), scaled_sq(stats.replicas()),
        scaled_ev(stats.replicas());
    for (std::size_t r = 0; r < stats.replicas(); ++r) {
        scaled[r].resize(nt);
        scaled_sq[r].resize(nt);
        scaled_ev[r].resize(nt);
        for (std::size_t k = 0; k < nt; ++k) {
            scaled[r][k] = stats.counts[r][k] / N;
            scaled_sq[r][k] = (stats.max_counts[r][k] / N) * (stats.max_counts[r][k] / N);
            scaled_ev[r][k] = stats.events[r][k] / N;
        }
    }

    for (std::size_t k = 0; k < nt; ++k) {
        const double t = stats.times[k];
        const double growth = std::exp(B1 * t + 0.5 * B2 * t * t);
        MomentAuditRow row;
        row.t = t;
        auto [mm, sm] = ReplicaStats::mean_se(scaled, k);
        row.mean_mass = mm;
        row.se_mass = sm;
        row.bound_mass = m0 * growth;
        row.mass_ok = mm <= row.bound_mass + 3.0 * sm;
        auto [ms, ss] = ReplicaStats::mean_se(scaled_sq, k);
        row.mean_sup_sq = ms;
        row.se_sup_sq = ss;
        row.bound_sup_sq = m0sq * std::exp(3.0 * (B1 * t + 0.5 * B2 * t * t));
        row.sup_sq_ok = ms <= row.bound_sup_sq + 3.0 * ss;
        auto [me, se] = ReplicaStats::mean_se(scaled_ev, k);
        row.mean_events = me;
        row.se_events = se;
        // births bounded by m0 (B1 t + B2 t^2/2) e^{...}; deaths by initial
        // mass plus births
        const double births = m0 * (B1 * t + 0.5 * B2 * t * t) * growth;
        row.bound_events = m0 + 2.0 * births;
        row.events_ok = me <= row.bound_events + 3.0 * se;
        audit.rows.push_back(row);
    }
    return audit;
}

double tail_mass(const Snapshot& snapshot, double R, double scale_N) {
    if (R < 0.0) throw std::invalid_argument("tail_mass: R must be >= 0");
    double count = 0.0;
    for (const Vec2& p : snapshot.positions)
        if (p.norm() > R) count += 1.0;
    return count / scale_N;
}

ConvergenceReport convergence_study(const RunConfig& base, const std::vector<std::uint64_t>& n_list,
                                    const std::vector<std::size_t>& replicas_per_n,
                                    const TestFunctionDictionary& dictionary,
                                    const MeanFieldResult& meanfield,
                                    std::uint64_t expected_model_hash) {
    if (n_list.size() < 2) throw std::invalid_argument("convergence_study: need at least 2 N values");
    if (!std::is_sorted(n_list.begin(), n_list.end()) ||
        std::adjacent_find(n_list.begin(), n_list.end()) != n_list.end())
        throw std::invalid_argument("convergence_study: N list must be strictly increasing");
    if (replicas_per_n.size() != n_list.size())
        throw std::invalid_argument("convergence_study: one replica count per N");
    if (dictionary.functions.empty())
        throw std::invalid_argument("convergence_study: empty dictionary");
    if (expected_model_hash != 0 && meanfield.model_hash != 0 &&
        expected_model_hash != meanfield.model_hash)
        throw std::invalid_argument(
            "convergence_study: particle and mean-field model specs do not match");

    // scaled initial mass of the base configuration
    const double m0 = static_cast<double>(base.model.initial.atom_count()) /
                      static_cast<double>(base.model.scale_N);

    // PDE pairings at the snapshot times shared with the particle runs
    struct PdeColumn {
        double t;
        std::vector<double> value;  // per dictionary entry
    };
    std::vector<PdeColumn> pde;
    for (std::size_t k = 0; k < meanfield.snapshot_times.size(); ++k) {
        PdeColumn col;
        col.t = meanfield.snapshot_times[k];
        for (const TestFunction& f : dictionary.functions)
            col.value.push_back(pairing(meanfield.snapshots[k], meanfield.grid, f));
        pde.push_back(std::move(col));
    }

    ConvergenceReport report;
    report.seed = base.seed;
    report.grid_h = meanfield.grid.h;

    for (std::size_t idx = 0; idx < n_list.size(); ++idx) {
        const std::uint64_t N = n_list[idx];
        RunConfig cfg = base;
        cfg.model.scale_N = N;
        if (cfg.model.initial.form == InitialCondition::Form::Atoms)
            throw std::invalid_argument(
                "convergence_study: base config must use a sampler initial condition");
        cfg.model.initial.count =
            static_cast<std::uint64_t>(std::llround(m0 * static_cast<double>(N)));
        cfg.population_cap = std::max<std::size_t>(base.population_cap, 64 * cfg.model.initial.count);
        cfg.seed = derive_seed(base.seed, "convergence", N);

        double err_sum = 0.0;
        std::size_t used = 0;
        auto observer = [&](std::size_t, const RunResult& res) {
            double worst = 0.0;
            for (const Snapshot& s : res.snapshots) {
                // match the PDE snapshot grid
                const PdeColumn* col = nullptr;
                for (const auto& c : pde)
                    if (std::abs(c.t - s.t) < 1e-9) {
                        col = &c;
                        break;
                    }
                if (!col) continue;
                for (std::size_t fi = 0; fi < dictionary.functions.size(); ++fi) {
                    const double zp =
                        pairing(s, dictionary.functions[fi], static_cast<double>(N));
                    worst = std::max(worst, std::abs(zp - col->value[fi]));
                }
            }
            err_sum += worst;
            ++used;
        };
        run_replicas(cfg, replicas_per_n[idx], observer);
        report.entries.push_back({N, used, err_sum / static_cast<double>(used)});
    }
    report.ratio_first_last = report.entries.front().err / report.entries.back().err;
    return report;
}

}  // namespace myco
