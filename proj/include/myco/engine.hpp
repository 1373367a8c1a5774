#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "myco/history.hpp"
#include "myco/kernels.hpp"
#include "myco/rng.hpp"

namespace myco {

struct RunConfig {
    ModelSpec model;
    double horizon = 1.0;          // T
    double dt = 0.01;              // SDE step
    double window = 0.0;           // thinning window; 0 means dt; must be a multiple of dt
    std::size_t snapshot_stride = 1;  // grid steps between snapshots
    std::size_t population_cap = 1000000;  // ever-created label budget
    std::uint64_t seed = 1;
    unsigned threads = 1;          // parallel drift workers within one replica

    void validate() const;  // throws std::invalid_argument listing the problem
};

enum class RunStatus { Ok, CapacityExceeded, NumericalError };

struct Snapshot {
    double t = 0.0;
    std::vector<Label> labels;
    std::vector<Vec2> positions;
    std::size_t max_alive = 0;   // sup of the alive count over [0, t]
    std::size_t events = 0;      // branching + death events in [0, t]
};

struct RunResult {
    RunStatus status = RunStatus::Ok;
    std::string message;
    std::vector<Snapshot> snapshots;
    HistoryRecord history;
    RunConfig config;
};

// ---- drift ----------------------------------------------------------------

// (1/N) * sum_v int_{lived(v) ∩ [t - tau_mem, t]} L_{t-s}(x - X^v_s) ds,
// trapezoidal quadrature on the stored samples of every lineage ever created.
Vec2 history_drift_field(const HistoryRecord& record, const Vec2& x, double t,
                         const InteractionKernel& kernel, double scale_N);

// drift experienced by a living label: the field evaluated at its position
Vec2 compute_drift(const HistoryRecord& record, Label u, double t,
                   const InteractionKernel& kernel, double scale_N);

// One Euler-Maruyama step for every alive label:
//   X(t+dt) = X(t) + drift(u, t) * dt + sigma * sqrt(dt) * xi_u,
// xi_u a standard planar normal from u's own stream. Appends samples at t+dt.
void step_sde(HistoryRecord& record, double t, double dt, const ModelSpec& model,
              RandomSource& rng, unsigned threads = 1);

// ---- exact thinning ---------------------------------------------------------

struct EventCandidate {
    double time = 0.0;
    EventKind kind = EventKind::Apical;
    Label actor = 0;
    double theta = 0.0;  // lateral only
    double mark = 0.0;   // accepted uniform coordinate in [0, majorant)
};

// Rate majorant for one window (from, t_end]:
//   sum_{u alive at `from`} (B1 + C * n/N) + sum_{u ever} B2 * lived_length(u, t_end).
// Lived lengths are taken at the window end so the bound dominates throughout.
struct WindowMajorant {
    double total = 0.0;
    double alive_slice = 0.0;          // per-actor width B1 + C * n / N
    std::vector<Label> alive;          // actors, ascending label
    std::vector<Label> lateral;        // every lineage with positive lived length
    std::vector<double> lateral_cum;   // cumulative slice widths over `lateral`
    double t_end = 0.0;
};

// `alive_hint`, when given, must equal record.alive_at(from); the run loop
// maintains it incrementally to avoid a full scan per event.
WindowMajorant build_majorant(const HistoryRecord& record, double from, double t_end,
                              const ModelSpec& model,
                              const std::vector<Label>* alive_hint = nullptr);

// d^N(X^u_s, Z_{s-}): the death rate of u against the left-limit population,
// so an event at exactly a jump time sees the pre-jump state.
double left_limit_death_rate(const HistoryRecord& record, Label u, double s,
                             const ModelSpec& model);

struct ThinningStats {
    std::size_t candidates = 0;
    std::size_t accepted = 0;
};

// First accepted event in (from, t_end], or nullopt. Positions must already be
// stepped through t_end; candidates read the frozen interpolated trajectory
// and the left-limit alive set. The caller applies the event and re-invokes
// from the event time (the majorant changes with the population).
std::optional<EventCandidate> next_event(const HistoryRecord& record, double from, double t_end,
                                         const ModelSpec& model, Stream& events,
                                         ThinningStats* stats = nullptr,
                                         const std::vector<Label>* alive_hint = nullptr);

// ---- orchestration ----------------------------------------------------------

RunResult run(const RunConfig& config);

// Count statistics over independent replicas (seeds derived from the master
// seed and the replica index), sampled at the common snapshot times.
struct ReplicaStats {
    std::vector<double> times;
    std::vector<std::vector<double>> counts;      // [replica][time] alive count
    std::vector<std::vector<double>> max_counts;  // running sup of the count
    std::vector<std::vector<double>> events;      // cumulative event count

    std::size_t replicas() const { return counts.size(); }
    // mean / standard error across replicas of an arbitrary per-replica series
    static std::pair<double, double> mean_se(const std::vector<std::vector<double>>& m,
                                             std::size_t time_index);
};

using ReplicaObserver = std::function<void(std::size_t replica, const RunResult&)>;

ReplicaStats run_replicas(const RunConfig& config, std::size_t n_replicas,
                          const ReplicaObserver& observer = {});

}  // namespace myco
