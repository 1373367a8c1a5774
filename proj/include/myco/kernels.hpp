#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "myco/vec2.hpp"

namespace myco {

class Stream;

// Interaction kernel L_t(x): the planar field a filament point exerts on a
// tip after lag t. Bounded by the envelope h1(t) and Lipschitz in x with
// constant h2(t); both envelopes are part of the kernel's declaration and are
// audited, not derived, for tabulated kernels.
//
// Built-in preset (exp_gaussian):
//   L_t(x) = sign * A * exp(-lambda*t) * x * exp(-|x|^2 / (2 w^2)),
// sign = -1 for attraction, +1 for repulsion, with analytic envelopes
//   h1(t) = |A| * w * exp(-1/2) * exp(-lambda*t),
//   h2(t) = |A| * exp(-lambda*t)        (sup of the Jacobian norm, attained at 0).
class InteractionKernel {
public:
    enum class Family { Zero, ExpGaussian, Table };

    InteractionKernel() = default;  // the zero kernel

    static InteractionKernel zero();
    static InteractionKernel exp_gaussian(double amplitude, double lambda, double width,
                                          bool attract, double tail_epsilon = 1e-6);
    // Regular-grid table over (lag, dx, dy) with trilinear interpolation and a
    // declared per-lag envelope table (h1, h2). Zero outside the table support.
    static InteractionKernel tabulated(std::vector<double> lags, std::vector<double> xs,
                                       std::vector<double> ys, std::vector<Vec2> values,
                                       std::vector<double> h1, std::vector<double> h2);
    // CSV with header lag,dx,dy,Lx,Ly (row-major over a regular grid) plus an
    // envelope CSV with header lag,h1,h2.
    static InteractionKernel from_csv(const std::string& kernel_file, const std::string& envelope_file);

    Family family() const { return family_; }
    double amplitude() const { return amplitude_; }
    double lambda() const { return lambda_; }
    double width() const { return width_; }
    bool attracting() const { return sign_ < 0.0; }
    double tail_epsilon() const { return tail_epsilon_; }

    // Memory horizon: the tail integral of h1 beyond tau_mem is at most
    // tail_epsilon. Infinite when h1 is not integrable (lambda == 0 preset).
    double tau_mem() const { return tau_mem_; }

    // L_lag(dx); zero vector once lag exceeds tau_mem. lag < 0 is an error.
    Vec2 eval(double lag, const Vec2& dx) const;

    double h1(double lag) const;
    double h2(double lag) const;
    // int_0^T h1(t) dt (analytic for presets, trapezoid for tables)
    double h1_integral(double T) const;
    // int_tau^inf h1(t) dt
    double h1_tail(double tau) const;
    // spatial support radius of a tabulated kernel (0 for other families)
    double table_reach() const;

    bool is_zero() const { return family_ == Family::Zero; }

private:
    Family family_ = Family::Zero;
    double amplitude_ = 0.0;
    double lambda_ = 0.0;
    double width_ = 1.0;
    double sign_ = -1.0;
    double tail_epsilon_ = 1e-6;
    double tau_mem_ = 0.0;

    // table data
    std::vector<double> lags_, xs_, ys_;
    std::vector<Vec2> values_;       // [lag][x][y] row-major
    std::vector<double> env_h1_, env_h2_;

    Vec2 table_eval(double lag, const Vec2& dx) const;
};

// Space-dependent nonnegative rate with a declared bound.
struct RateFunction {
    enum class Form { Constant, GaussianBump, Plateau };

    Form form = Form::Constant;
    double base = 0.0;    // constant part
    double amp = 0.0;     // bump/plateau amplitude on top of base
    Vec2 center{0.0, 0.0};
    double width = 1.0;   // bump std dev / plateau shoulder scale
    double radius = 1.0;  // plateau radius

    static RateFunction constant(double value);
    static RateFunction gaussian_bump(double base, double amp, Vec2 center, double width);
    static RateFunction plateau(double base, double amp, Vec2 center, double radius, double width);

    double operator()(const Vec2& x) const;
    // analytic supremum for the presets
    double sup() const { return base + std::max(amp, 0.0); }
};

struct BranchingRates {
    RateFunction b1;  // apical, 1/time
    double B1 = 0.0;  // declared bound for b1 (thinning majorant)
    RateFunction b2;  // lateral, 1/time per unit lived time
    double B2 = 0.0;  // declared bound for b2
};

// Death rate d(x, nu) with the (d_1) bound constant C. The (d_2) witness Psi
// exists analytically for the total-mass form (Psi == gamma); the convolution
// form is reported "not certified" by the audit.
class DeathRate {
public:
    enum class Form { Zero, TotalMass, Convolution };

    static DeathRate zero();
    static DeathRate total_mass(double gamma);
    static DeathRate convolution(double gamma, double height, double width);

    Form form() const { return form_; }
    double gamma() const { return gamma_; }
    double height() const { return height_; }
    double width() const { return width_; }

    // (d_1) constant: d(x, nu) <= C * <nu, 1>
    double bound_C() const;

    // bump value phi_w(r), convolution form only
    double bump(double r2) const;

    // d(x, (1/N) sum delta_{x_i}) over an explicit atom list
    double eval(const Vec2& x, const std::vector<Vec2>& alive, double scale_N) const;

    bool is_zero() const { return form_ == Form::Zero; }

private:
    Form form_ = Form::Zero;
    double gamma_ = 0.0;
    double height_ = 1.0;
    double width_ = 1.0;
};

// Initial condition: explicit atoms or a sampler shape with an atom count.
struct InitialCondition {
    enum class Form { Atoms, Point, Gaussian, UniformDisc };

    Form form = Form::Point;
    std::vector<Vec2> atoms;
    Vec2 center{0.0, 0.0};
    double width = 1.0;   // gaussian std dev
    double radius = 1.0;  // disc radius
    std::uint64_t count = 0;

    std::uint64_t atom_count() const { return form == Form::Atoms ? atoms.size() : count; }
    std::vector<Vec2> sample(Stream& rng) const;
    // density of the sampler shape, normalised to unit mass (Atoms/Point have
    // no density; the mean-field initialiser smooths those)
    bool has_density() const { return form == Form::Gaussian || form == Form::UniformDisc; }
    double density(const Vec2& x) const;
};

struct ModelSpec {
    InteractionKernel kernel;
    BranchingRates rates;
    DeathRate death;
    double sigma = 0.0;       // diffusion amplitude
    std::uint64_t scale_N = 1;  // population scale of the large-N limit
    InitialCondition initial;
};

// ---- assumption audit ----------------------------------------------------

struct AuditPlan {
    std::size_t samples = 10000;  // random (t,x[,y]) probes per check
    double t_max = 5.0;
    double extent = 5.0;          // spatial probe box half-width
    std::uint64_t seed = 20240901;
};

enum class AuditStatus { Pass, Fail, NotCertified };

struct AuditEntry {
    std::string name;
    AuditStatus status = AuditStatus::Pass;
    double max_violation = 0.0;
    std::string detail;
};

struct AuditReport {
    std::vector<AuditEntry> entries;
    bool all_certified_pass() const;
    const AuditEntry* find(const std::string& name) const;
};

// Numerically audits (L_1), (L_2), h1 integrability/tail, the b1/b2 bounds and
// (d_1)/(d_2) on a random sample grid. Violations are max observed excess.
AuditReport audit_assumptions(const ModelSpec& spec, const AuditPlan& plan);

}  // namespace myco
