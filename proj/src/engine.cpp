#include "myco/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace myco {

void RunConfig::validate() const {
    if (horizon <= 0.0) throw std::invalid_argument("run config: horizon must be > 0");
    if (dt <= 0.0) throw std::invalid_argument("run config: dt must be > 0");
    const double w = window == 0.0 ? dt : window;
    if (w < dt) throw std::invalid_argument("run config: window must satisfy dt <= window");
    const double ratio = w / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
        throw std::invalid_argument("run config: window must be an integer multiple of dt");
    if (snapshot_stride == 0) throw std::invalid_argument("run config: snapshot stride must be >= 1");
    if (model.sigma < 0.0) throw std::invalid_argument("model: sigma must be >= 0");
    if (model.scale_N < 1) throw std::invalid_argument("model: scale N must be >= 1");
    if (population_cap < model.initial.atom_count())
        throw std::invalid_argument("run config: population cap below initial count");
}

// ---- drift ------------------------------------------------------------------

namespace {

// integral over one lineage's lived samples restricted to [lo, hi]
template <typename F>
inline Vec2 trapezoid_over(const Lineage& l, double lo, double hi, F&& integrand) {
    const std::size_t n = l.sample_count();
    if (hi <= lo || n == 0) return {0.0, 0.0};
    // first sample index with time > lo
    std::size_t i = 0;
    if (l.sample_time(0) <= lo) {
        std::size_t a = 0, b = n;
        while (a + 1 < b) {
            const std::size_t m = (a + b) / 2;
            if (l.sample_time(m) <= lo)
                a = m;
            else
                b = m;
        }
        i = a + 1;
    }
    double prev_t = lo;
    Vec2 prev_f = integrand(lo, l.position_at(lo));
    Vec2 acc{0.0, 0.0};
    for (; i < n && l.sample_time(i) < hi; ++i) {
        const double ti = l.sample_time(i);
        const Vec2 fi = integrand(ti, l.sample_position(i));
        acc += 0.5 * (ti - prev_t) * (prev_f + fi);
        prev_t = ti;
        prev_f = fi;
    }
    const Vec2 fend = integrand(hi, l.position_at(hi));
    acc += 0.5 * (hi - prev_t) * (prev_f + fend);
    return acc;
}

}  // namespace

Vec2 history_drift_field(const HistoryRecord& record, const Vec2& x, double t,
                         const InteractionKernel& kernel, double scale_N) {
    if (kernel.is_zero()) return {0.0, 0.0};
    const double tau = kernel.tau_mem();
    const double window_lo = std::isfinite(tau) ? std::max(0.0, t - tau) : 0.0;

    Vec2 acc{0.0, 0.0};
    if (kernel.family() == InteractionKernel::Family::ExpGaussian) {
        // inlined preset: one exp per stored sample
        const double c = (kernel.attracting() ? -1.0 : 1.0) * kernel.amplitude();
        const double lam = kernel.lambda();
        const double inv2w2 = 1.0 / (2.0 * kernel.width() * kernel.width());
        record.for_each_lineage([&](const Lineage& l) {
            const double lo = std::max(l.birth_time(), window_lo);
            const double hi = std::min(l.death_time() ? *l.death_time() : t, t);
            acc += trapezoid_over(l, lo, hi, [&](double s, const Vec2& p) {
                const Vec2 d = x - p;
                const double m = c * std::exp(-lam * (t - s) - d.norm2() * inv2w2);
                return Vec2{m * d.x, m * d.y};
            });
        });
    } else {
        record.for_each_lineage([&](const Lineage& l) {
            const double lo = std::max(l.birth_time(), window_lo);
            const double hi = std::min(l.death_time() ? *l.death_time() : t, t);
            acc += trapezoid_over(l, lo, hi,
                                  [&](double s, const Vec2& p) { return kernel.eval(t - s, x - p); });
        });
    }
    return (1.0 / scale_N) * acc;
}

Vec2 compute_drift(const HistoryRecord& record, Label u, double t,
                   const InteractionKernel& kernel, double scale_N) {
    const Lineage& l = record.lineage(u);
    if (!l.alive_at(t))
        throw std::logic_error("compute_drift: label " + std::to_string(u) + " not alive at t=" +
                               std::to_string(t));
    return history_drift_field(record, l.position_at(t), t, kernel, scale_N);
}

// ---- stepping ----------------------------------------------------------------

namespace {

void step_one(HistoryRecord& record, Label u, double t_from, double t_to, const Vec2& drift,
              const ModelSpec& model, RandomSource& rng) {
    const double h = t_to - t_from;
    Lineage& l = record.lineage_mut(u);
    Vec2 x = l.last_sample_position();
    x += h * drift;
    if (model.sigma > 0.0) {
        const Vec2 xi = rng.noise(u).normal2();
        x += (model.sigma * std::sqrt(h)) * xi;
    }
    l.append_sample(t_to, x);
}

}  // namespace

void step_sde(HistoryRecord& record, double t, double dt, const ModelSpec& model,
              RandomSource& rng, unsigned threads) {
    if (dt <= 0.0) throw std::invalid_argument("step_sde: dt must be > 0");
    const std::vector<Label> alive = record.alive_at(t);
    std::vector<Vec2> drifts(alive.size(), Vec2{0.0, 0.0});

    if (!model.kernel.is_zero()) {
        // drifts are independent reads of the frozen record
        auto work = [&](std::size_t a, std::size_t b) {
            for (std::size_t i = a; i < b; ++i)
                drifts[i] = compute_drift(record, alive[i], t, model.kernel,
                                          static_cast<double>(model.scale_N));
        };
        if (threads <= 1 || alive.size() < 2 * threads) {
            work(0, alive.size());
        } else {
            std::vector<std::thread> pool;
            const std::size_t chunk = (alive.size() + threads - 1) / threads;
            for (unsigned w = 0; w < threads; ++w) {
                const std::size_t a = w * chunk;
                const std::size_t b = std::min(alive.size(), a + chunk);
                if (a >= b) break;
                pool.emplace_back(work, a, b);
            }
            for (auto& th : pool) th.join();
        }
    }
    for (std::size_t i = 0; i < alive.size(); ++i)
        step_one(record, alive[i], t, t + dt, drifts[i], model, rng);
    record.advance_time(t + dt);
}

// ---- thinning ----------------------------------------------------------------

WindowMajorant build_majorant(const HistoryRecord& record, double from, double t_end,
                              const ModelSpec& model, const std::vector<Label>* alive_hint) {
    WindowMajorant m;
    m.t_end = t_end;
    m.alive = alive_hint ? *alive_hint : record.alive_at(from);
    const double N = static_cast<double>(model.scale_N);
    m.alive_slice =
        model.rates.B1 + model.death.bound_C() * static_cast<double>(m.alive.size()) / N;
    m.total = m.alive_slice * static_cast<double>(m.alive.size());
    if (model.rates.B2 > 0.0) {
        double cum = 0.0;
        record.for_each_lineage([&](const Lineage& l) {
            const double len = l.lived_length(t_end);
            if (len > 0.0) {
                cum += model.rates.B2 * len;
                m.lateral.push_back(l.label());
                m.lateral_cum.push_back(cum);
            }
        });
        m.total += cum;
    }
    return m;
}

namespace {

double death_rate_against(const HistoryRecord& record, Label u, double s, const ModelSpec& model,
                          const std::vector<Label>& alive) {
    if (model.death.form() == DeathRate::Form::TotalMass)
        return model.death.gamma() * static_cast<double>(alive.size()) /
               static_cast<double>(model.scale_N);
    std::vector<Vec2> pos;
    pos.reserve(alive.size());
    for (Label v : alive) pos.push_back(record.position_at(v, s));
    return model.death.eval(record.position_at(u, s), pos, static_cast<double>(model.scale_N));
}

}  // namespace

double left_limit_death_rate(const HistoryRecord& record, Label u, double s,
                             const ModelSpec& model) {
    if (model.death.is_zero()) return 0.0;
    return death_rate_against(record, u, s, model, record.alive_before(s));
}

std::optional<EventCandidate> next_event(const HistoryRecord& record, double from, double t_end,
                                         const ModelSpec& model, Stream& events,
                                         ThinningStats* stats,
                                         const std::vector<Label>* alive_hint) {
    const WindowMajorant m = build_majorant(record, from, t_end, model, alive_hint);
    if (m.total <= 0.0) return std::nullopt;

    auto accept = [&](EventCandidate c) {
        if (stats) ++stats->accepted;
        return c;
    };
    double s = from;
    const double alive_total = m.alive_slice * static_cast<double>(m.alive.size());
    while (true) {
        s += events.exponential(m.total);
        if (s > t_end) return std::nullopt;
        if (stats) ++stats->candidates;
        const double mark = events.uniform() * m.total;

        if (mark < alive_total) {
            const std::size_t idx = static_cast<std::size_t>(mark / m.alive_slice);
            const Label actor = m.alive[std::min(idx, m.alive.size() - 1)];
            const double local = mark - static_cast<double>(idx) * m.alive_slice;
            const Vec2 x = record.position_at(actor, s);
            const double b1v = model.rates.b1(x);
            if (local <= b1v) return accept({s, EventKind::Apical, actor, 0.0, mark});
            // no event lands in (from, s), so V_{s-} is exactly the window's
            // alive set: the left-limit convention at no extra scan
            const double dv = model.death.is_zero()
                                  ? 0.0
                                  : death_rate_against(record, actor, s, model, m.alive);
            if (local <= b1v + dv) return accept({s, EventKind::Death, actor, 0.0, mark});
            continue;  // rejected: the (B1 + C n/N) slice exceeds the true rates
        }

        // lateral slices, one per lineage ever created with positive lived time
        const double lm = mark - alive_total;
        const auto it = std::upper_bound(m.lateral_cum.begin(), m.lateral_cum.end(), lm);
        if (it == m.lateral_cum.end()) continue;  // float edge at the very top of the band
        const std::size_t idx = static_cast<std::size_t>(it - m.lateral_cum.begin());
        const Label actor = m.lateral[idx];
        const Lineage& l = record.lineage(actor);
        const double len_end = l.lived_length(t_end);
        const double len_s = l.lived_length(s);
        // theta drawn uniform, mapped into the actor's lived interval up to s;
        // acceptance b2/B2 times the lived fraction reproduces the exact
        // intensity (integral of b2 over the lived segment)
        const double u01 = events.uniform();
        const double accept_u = events.uniform();
        if (len_s <= 0.0) continue;
        double ancestral = l.birth_time() + u01 * len_s;
        const double theta = std::clamp(ancestral / s, 1e-12, 1.0 - 1e-12);
        ancestral = theta * s;
        if (ancestral < l.birth_time() || ancestral > l.birth_time() + len_s) continue;
        const double b2v = model.rates.b2(l.position_at(ancestral));
        const double p = (b2v / model.rates.B2) * (len_s / len_end);
        if (accept_u < p) return accept({s, EventKind::Lateral, actor, theta, mark});
    }
}

// ---- run ----------------------------------------------------------------------

namespace {

struct StepGrid {
    double dt;
    double horizon;
    std::size_t n_steps;

    double time_of(std::size_t i) const { return std::min(static_cast<double>(i) * dt, horizon); }
};

Snapshot make_snapshot(const HistoryRecord& record, double t, std::size_t initial_count) {
    Snapshot s;
    s.t = t;
    s.labels = record.alive_at(t);
    s.positions.reserve(s.labels.size());
    for (Label u : s.labels) s.positions.push_back(record.position_at(u, t));
    // reconstruct the running sup of the alive count from the event log prefix
    std::size_t count = initial_count;
    std::size_t sup = count;
    std::size_t n_events = 0;
    for (const EventRecord& e : record.events()) {
        if (e.time > t) break;
        ++n_events;
        if (e.kind == EventKind::Death)
            --count;
        else
            ++count;
        sup = std::max(sup, count);
    }
    s.max_alive = sup;
    s.events = n_events;
    return s;
}

}  // namespace

RunResult run(const RunConfig& config) {
    config.validate();
    RunResult result;
    result.config = config;

    RandomSource rng(config.seed);
    Stream init_stream(derive_seed(config.seed, "initial", 0));
    const std::vector<Vec2> atoms = config.model.initial.sample(init_stream);
    HistoryRecord record(atoms);

    const double window = config.window == 0.0 ? config.dt : config.window;
    const std::size_t steps_per_window =
        static_cast<std::size_t>(std::llround(window / config.dt));
    StepGrid grid{config.dt, config.horizon,
                  static_cast<std::size_t>(std::ceil(config.horizon / config.dt - 1e-12))};

    result.snapshots.push_back(make_snapshot(record, 0.0, record.initial_count()));

    const ModelSpec& model = config.model;
    // the alive label set, maintained incrementally across events
    std::vector<Label> alive;
    alive.reserve(record.initial_count());
    for (Label u = 1; u <= record.initial_count(); ++u) alive.push_back(u);

    std::size_t step = 0;
    bool aborted = false;
    while (step < grid.n_steps && !aborted) {
        const std::size_t window_first = step;
        const std::size_t window_last = std::min(grid.n_steps, step + steps_per_window);
        const double t0 = grid.time_of(window_first);
        const double t_end = grid.time_of(window_last);

        for (std::size_t i = window_first; i < window_last; ++i) {
            const double a = grid.time_of(i), b = grid.time_of(i + 1);
            if (b > a) step_sde(record, a, b - a, model, rng, config.threads);
        }

        double cursor = t0;
        while (auto ev = next_event(record, cursor, t_end, model, rng.events(), nullptr, &alive)) {
            const double s = ev->time;
            switch (ev->kind) {
                case EventKind::Apical:
                case EventKind::Lateral: {
                    if (record.ever_created() + 1 > config.population_cap) {
                        result.status = RunStatus::CapacityExceeded;
                        result.message = "population cap " + std::to_string(config.population_cap) +
                                         " reached at t=" + std::to_string(s);
                        aborted = true;
                        break;
                    }
                    const Label child = ev->kind == EventKind::Apical
                                            ? record.spawn_apical(ev->actor, s, ev->mark)
                                            : record.spawn_lateral(ev->actor, s, ev->theta, ev->mark);
                    alive.push_back(child);  // labels are issued in ascending order
                    // bring the newborn onto the step grid through the window end
                    double from = s;
                    for (std::size_t i = window_first; i <= window_last; ++i) {
                        const double gt = grid.time_of(i);
                        if (gt <= from) continue;
                        const Vec2 d = model.kernel.is_zero()
                                           ? Vec2{0.0, 0.0}
                                           : compute_drift(record, child, from, model.kernel,
                                                           static_cast<double>(model.scale_N));
                        step_one(record, child, from, gt, d, model, rng);
                        from = gt;
                    }
                    break;
                }
                case EventKind::Death: {
                    record.kill(ev->actor, s, ev->mark);
                    const auto it = std::lower_bound(alive.begin(), alive.end(), ev->actor);
                    alive.erase(it);
                    break;
                }
            }
            if (aborted) break;
            cursor = s;
        }

        // non-finite positions abort the run; no clamping
        if (!aborted) {
            for (Label u : alive) {
                const Vec2 p = record.lineage(u).last_sample_position();
                if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
                    result.status = RunStatus::NumericalError;
                    result.message = "non-finite position for label " + std::to_string(u) +
                                     " at t=" + std::to_string(t_end);
                    aborted = true;
                    break;
                }
            }
        }

        for (std::size_t i = window_first + 1; i <= window_last && !aborted; ++i) {
            if (i % config.snapshot_stride == 0 || i == grid.n_steps)
                result.snapshots.push_back(
                    make_snapshot(record, grid.time_of(i), record.initial_count()));
        }
        step = window_last;
    }

    result.history = std::move(record);
    return result;
}

std::pair<double, double> ReplicaStats::mean_se(const std::vector<std::vector<double>>& m,
                                                std::size_t time_index) {
    const std::size_t n = m.size();
    double mean = 0.0;
    for (const auto& row : m) mean += row[time_index];
    mean /= static_cast<double>(n);
    if (n < 2) return {mean, 0.0};
    double var = 0.0;
    for (const auto& row : m) {
        const double d = row[time_index] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

ReplicaStats run_replicas(const RunConfig& config, std::size_t n_replicas,
                          const ReplicaObserver& observer) {
    if (n_replicas < 1) throw std::invalid_argument("run_replicas: need at least one replica");
    ReplicaStats stats;
    for (std::size_t r = 0; r < n_replicas; ++r) {
        RunConfig rc = config;
        rc.seed = derive_seed(config.seed, "replica", r);
        RunResult res;
        try {
            res = run(rc);
        } catch (const std::exception& e) {
            throw std::runtime_error("replica " + std::to_string(r) + ": " + e.what());
        }
        if (res.status != RunStatus::Ok)
            throw std::runtime_error("replica " + std::to_string(r) + ": " + res.message);
        if (stats.times.empty())
            for (const Snapshot& s : res.snapshots) stats.times.push_back(s.t);
        std::vector<double> c, mc, ev;
        for (const Snapshot& s : res.snapshots) {
            c.push_back(static_cast<double>(s.labels.size()));
            mc.push_back(static_cast<double>(s.max_alive));
            ev.push_back(static_cast<double>(s.events));
        }
        stats.counts.push_back(std::move(c));
        stats.max_counts.push_back(std::move(mc));
        stats.events.push_back(std::move(ev));
        if (observer) observer(r, res);
    }
    return stats;
}

}  // namespace myco
