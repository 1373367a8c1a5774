#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "myco/engine.hpp"
#include "myco/kernels.hpp"
#include "myco/meanfield.hpp"

namespace myco {

// Smooth bounded test function with bounded first and second derivatives.
// Presets: constants, planar Gaussians, and coordinate functions smoothly cut
// off at a configurable radius (quintic taper, C^2).
struct TestFunction {
    enum class Type { Constant, Gaussian, Coordinate };

    Type type = Type::Constant;
    std::string name = "one";
    double scale = 1.0;    // constant value / gaussian amplitude
    Vec2 center{0.0, 0.0};
    double width = 1.0;    // gaussian std dev
    int axis = 0;          // coordinate functions
    double cutoff = 5.0;   // coordinate cutoff: identity inside, zero beyond 2x

    static TestFunction constant(double value = 1.0);
    static TestFunction gaussian(Vec2 center, double width, double amplitude = 1.0);
    static TestFunction coordinate(int axis, double cutoff);

    double value(const Vec2& x) const;
    Vec2 gradient(const Vec2& x) const;
    Vec2 hessian_diag(const Vec2& x) const;  // (d2f/dx2, d2f/dy2)
    double sup_norm() const;
};

struct TestFunctionDictionary {
    std::vector<TestFunction> functions;
    static TestFunctionDictionary standard(double extent = 3.0);
};

// <nu, f> pairings: scaled empirical measure or gridded density
double pairing(const Snapshot& snapshot, const TestFunction& f, double scale_N);
double pairing(const std::vector<double>& rho, const GridSpec& grid, const TestFunction& f);

// Martingale residual of the scaled process at every snapshot horizon t:
//   M_t = <Z_t,f> - <Z_0,f> - int_0^t <Z_s, grad f . D_s + (s^2/2) Lap f
//                                   + (b1 + b2 (t-s) - d) f> ds,
// trapezoid over snapshot times; the drift D_s reuses the engine quadrature.
// The (t-s) weight makes the compensator horizon-dependent, so M is
// recomputed per t rather than accumulated.
std::vector<double> martingale_residual(const RunResult& result, const TestFunction& f,
                                        const ModelSpec& model);

// Moment-bound audit against the first and second moment growth bounds and
// the expected event-count bound, with 3 SE statistical slack.
struct MomentAuditRow {
    double t = 0.0;
    double mean_mass = 0.0;      // scaled <Z_t, 1> averaged over replicas
    double se_mass = 0.0;
    double bound_mass = 0.0;     // m0 exp(B1 t + B2 t^2 / 2)
    bool mass_ok = true;
    double mean_sup_sq = 0.0;    // scaled sup_{s<=t} <Z_s,1>^2
    double se_sup_sq = 0.0;
    double bound_sup_sq = 0.0;   // m0^2 exp(3 (B1 t + B2 t^2 / 2))
    bool sup_sq_ok = true;
    double mean_events = 0.0;    // events per unit scale
    double se_events = 0.0;
    double bound_events = 0.0;   // m0 (B1 t + B2 t^2/2) exp(B1 t + B2 t^2/2) plus deaths
    bool events_ok = true;
};

struct MomentAudit {
    std::vector<MomentAuditRow> rows;
    bool all_pass() const;
};

MomentAudit moment_audit(const ReplicaStats& stats, const ModelSpec& model);

// scaled mass strictly outside radius R
double tail_mass(const Snapshot& snapshot, double R, double scale_N);

// ---- convergence of the empirical measure to the mean-field density ----------

struct ConvergenceEntry {
    std::uint64_t N = 0;
    std::size_t replicas = 0;
    double err = 0.0;  // mean over replicas of max_{f, t} |<Z^N_t, f> - <rho_t, f>|
};

struct ConvergenceReport {
    std::vector<ConvergenceEntry> entries;  // N strictly increasing
    double ratio_first_last = 0.0;          // err(N_min) / err(N_max)
    std::uint64_t seed = 0;
    double grid_h = 0.0;
    double bandwidth = 0.0;
};

// Runs the particle engine at every N in `n_list` (initial count rescaled so
// the scaled initial mass matches the base config) against a single mean-field
// solution sharing the ModelSpec. Snapshot times must align.
ConvergenceReport convergence_study(const RunConfig& base, const std::vector<std::uint64_t>& n_list,
                                    const std::vector<std::size_t>& replicas_per_n,
                                    const TestFunctionDictionary& dictionary,
                                    const MeanFieldResult& meanfield,
                                    std::uint64_t expected_model_hash = 0);

}  // namespace myco
