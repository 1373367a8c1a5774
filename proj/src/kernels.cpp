#include "myco/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "myco/rng.hpp"

namespace myco {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// index of the cell [grid[i], grid[i+1]] containing v, clamped to the grid
std::size_t bracket(const std::vector<double>& grid, double v) {
    auto it = std::upper_bound(grid.begin(), grid.end(), v);
    std::size_t hi = static_cast<std::size_t>(it - grid.begin());
    if (hi == 0) return 0;
    if (hi >= grid.size()) return grid.size() - 2;
    return hi - 1;
}

double lerp_weight(const std::vector<double>& grid, std::size_t i, double v) {
    const double a = grid[i], b = grid[i + 1];
    if (b <= a) return 0.0;
    return std::clamp((v - a) / (b - a), 0.0, 1.0);
}

}  // namespace

InteractionKernel InteractionKernel::zero() {
    InteractionKernel k;
    k.family_ = Family::Zero;
    k.tau_mem_ = 0.0;
    return k;
}

InteractionKernel InteractionKernel::exp_gaussian(double amplitude, double lambda, double width,
                                                  bool attract, double tail_epsilon) {
    if (width <= 0.0) throw std::invalid_argument("exp_gaussian kernel: width must be positive");
    if (lambda < 0.0) throw std::invalid_argument("exp_gaussian kernel: lambda must be >= 0");
    if (tail_epsilon <= 0.0) throw std::invalid_argument("exp_gaussian kernel: tail epsilon must be > 0");
    InteractionKernel k;
    k.family_ = Family::ExpGaussian;
    k.amplitude_ = amplitude;
    k.lambda_ = lambda;
    k.width_ = width;
    k.sign_ = attract ? -1.0 : 1.0;
    k.tail_epsilon_ = tail_epsilon;
    const double h1_0 = std::abs(amplitude) * width * std::exp(-0.5);
    if (amplitude == 0.0) {
        k.tau_mem_ = 0.0;
    } else if (lambda == 0.0) {
        // h1 is not integrable; no finite horizon truncates the memory
        k.tau_mem_ = kInf;
    } else {
        // int_tau^inf h1 = h1(0) e^{-lambda tau} / lambda <= eps
        k.tau_mem_ = std::max(0.0, std::log(h1_0 / (lambda * tail_epsilon)) / lambda);
    }
    return k;
}

InteractionKernel InteractionKernel::tabulated(std::vector<double> lags, std::vector<double> xs,
                                               std::vector<double> ys, std::vector<Vec2> values,
                                               std::vector<double> h1, std::vector<double> h2) {
    if (lags.size() < 2 || xs.size() < 2 || ys.size() < 2)
        throw std::invalid_argument("tabulated kernel: need at least 2 nodes per axis");
    if (values.size() != lags.size() * xs.size() * ys.size())
        throw std::invalid_argument("tabulated kernel: value count does not match grid");
    if (h1.size() != lags.size() || h2.size() != lags.size())
        throw std::invalid_argument("tabulated kernel: envelope table must match the lag grid");
    if (!std::is_sorted(lags.begin(), lags.end()) || !std::is_sorted(xs.begin(), xs.end()) ||
        !std::is_sorted(ys.begin(), ys.end()))
        throw std::invalid_argument("tabulated kernel: grid axes must be sorted");
    if (lags.front() < 0.0) throw std::invalid_argument("tabulated kernel: negative lag");
    InteractionKernel k;
    k.family_ = Family::Table;
    k.lags_ = std::move(lags);
    k.xs_ = std::move(xs);
    k.ys_ = std::move(ys);
    k.values_ = std::move(values);
    k.env_h1_ = std::move(h1);
    k.env_h2_ = std::move(h2);
    k.tau_mem_ = k.lags_.back();  // kernel and envelopes vanish beyond the table
    return k;
}

InteractionKernel InteractionKernel::from_csv(const std::string& kernel_file,
                                              const std::string& envelope_file) {
    auto read_rows = [](const std::string& path, std::size_t ncols, const std::string& header) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open kernel table: " + path);
        std::string line;
        if (!std::getline(in, line)) throw std::runtime_error("empty kernel table: " + path);
        // tolerate whitespace / CR in the header
        std::string cleaned;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) cleaned += c;
        if (cleaned != header)
            throw std::runtime_error(path + ": expected header '" + header + "', got '" + cleaned + "'");
        std::vector<std::vector<double>> rows;
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
            std::vector<double> row;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
            if (row.size() != ncols)
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                                         std::to_string(ncols) + " columns");
            rows.push_back(std::move(row));
        }
        return rows;
    };

    const auto krows = read_rows(kernel_file, 5, "lag,dx,dy,Lx,Ly");
    const auto erows = read_rows(envelope_file, 3, "lag,h1,h2");

    auto axis = [](const std::vector<std::vector<double>>& rows, std::size_t col) {
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r[col]);
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    };
    std::vector<double> lags = axis(krows, 0), xs = axis(krows, 1), ys = axis(krows, 2);
    if (krows.size() != lags.size() * xs.size() * ys.size())
        throw std::runtime_error(kernel_file + ": rows do not form a regular lag,dx,dy grid");

    auto idx_of = [](const std::vector<double>& grid, double v) {
        auto it = std::lower_bound(grid.begin(), grid.end(), v);
        return static_cast<std::size_t>(it - grid.begin());
    };
    std::vector<Vec2> values(krows.size());
    std::vector<bool> seen(krows.size(), false);
    for (const auto& r : krows) {
        const std::size_t i = idx_of(lags, r[0]), j = idx_of(xs, r[1]), k = idx_of(ys, r[2]);
        const std::size_t flat = (i * xs.size() + j) * ys.size() + k;
        if (seen[flat]) throw std::runtime_error(kernel_file + ": duplicate grid point");
        seen[flat] = true;
        values[flat] = Vec2{r[3], r[4]};
    }

    std::vector<double> h1(lags.size(), 0.0), h2(lags.size(), 0.0);
    std::vector<bool> have(lags.size(), false);
    for (const auto& r : erows) {
        const std::size_t i = idx_of(lags, r[0]);
        if (i >= lags.size() || lags[i] != r[0])
            throw std::runtime_error(envelope_file + ": envelope lag not in kernel lag grid");
        h1[i] = r[1];
        h2[i] = r[2];
        have[i] = true;
    }
    for (bool b : have)
        if (!b) throw std::runtime_error(envelope_file + ": envelope table must cover every lag");

    return tabulated(std::move(lags), std::move(xs), std::move(ys), std::move(values),
                     std::move(h1), std::move(h2));
}

Vec2 InteractionKernel::table_eval(double lag, const Vec2& dx) const {
    if (lag > lags_.back() || dx.x < xs_.front() || dx.x > xs_.back() || dx.y < ys_.front() ||
        dx.y > ys_.back())
        return {0.0, 0.0};
    const std::size_t i = bracket(lags_, lag);
    const std::size_t j = bracket(xs_, dx.x);
    const std::size_t k = bracket(ys_, dx.y);
    const double wt = lerp_weight(lags_, i, lag);
    const double wx = lerp_weight(xs_, j, dx.x);
    const double wy = lerp_weight(ys_, k, dx.y);
    auto at = [&](std::size_t a, std::size_t b, std::size_t c) -> const Vec2& {
        return values_[(a * xs_.size() + b) * ys_.size() + c];
    };
    Vec2 out{0.0, 0.0};
    for (int da = 0; da < 2; ++da)
        for (int db = 0; db < 2; ++db)
            for (int dc = 0; dc < 2; ++dc) {
                const double w = (da ? wt : 1.0 - wt) * (db ? wx : 1.0 - wx) * (dc ? wy : 1.0 - wy);
                if (w != 0.0) out += w * at(i + da, j + db, k + dc);
            }
    return out;
}

Vec2 InteractionKernel::eval(double lag, const Vec2& dx) const {
    if (lag < 0.0) throw std::invalid_argument("eval_kernel: negative lag");
    switch (family_) {
        case Family::Zero:
            return {0.0, 0.0};
        case Family::ExpGaussian: {
            if (lag > tau_mem_) return {0.0, 0.0};
            const double w2 = width_ * width_;
            const double m =
                sign_ * amplitude_ * std::exp(-lambda_ * lag - dx.norm2() / (2.0 * w2));
            return {m * dx.x, m * dx.y};
        }
        case Family::Table:
            return table_eval(lag, dx);
    }
    return {0.0, 0.0};
}

double InteractionKernel::h1(double lag) const {
    switch (family_) {
        case Family::Zero:
            return 0.0;
        case Family::ExpGaussian:
            return std::abs(amplitude_) * width_ * std::exp(-0.5) * std::exp(-lambda_ * lag);
        case Family::Table: {
            if (lag > lags_.back()) return 0.0;
            const std::size_t i = bracket(lags_, lag);
            const double w = lerp_weight(lags_, i, lag);
            return (1.0 - w) * env_h1_[i] + w * env_h1_[i + 1];
        }
    }
    return 0.0;
}

double InteractionKernel::h2(double lag) const {
    switch (family_) {
        case Family::Zero:
            return 0.0;
        case Family::ExpGaussian:
            // sup |grad k| = 1 for k(x) = x exp(-|x|^2/(2w^2)), any w
            return std::abs(amplitude_) * std::exp(-lambda_ * lag);
        case Family::Table: {
            if (lag > lags_.back()) return 0.0;
            const std::size_t i = bracket(lags_, lag);
            const double w = lerp_weight(lags_, i, lag);
            return (1.0 - w) * env_h2_[i] + w * env_h2_[i + 1];
        }
    }
    return 0.0;
}

double InteractionKernel::h1_integral(double T) const {
    if (T <= 0.0) return 0.0;
    switch (family_) {
        case Family::Zero:
            return 0.0;
        case Family::ExpGaussian: {
            const double h1_0 = std::abs(amplitude_) * width_ * std::exp(-0.5);
            if (lambda_ == 0.0) return h1_0 * T;
            return h1_0 * (1.0 - std::exp(-lambda_ * T)) / lambda_;
        }
        case Family::Table: {
            double acc = 0.0;
            for (std::size_t i = 0; i + 1 < lags_.size(); ++i) {
                const double a = lags_[i], b = std::min(lags_[i + 1], T);
                if (b <= a) break;
                const double fb = h1(b);
                acc += 0.5 * (env_h1_[i] + fb) * (b - a);
                if (b >= T) break;
            }
            return acc;
        }
    }
    return 0.0;
}

double InteractionKernel::table_reach() const {
    if (family_ != Family::Table) return 0.0;
    double r = 0.0;
    for (double v : {xs_.front(), xs_.back(), ys_.front(), ys_.back()}) r = std::max(r, std::abs(v));
    return r;
}

double InteractionKernel::h1_tail(double tau) const {
    switch (family_) {
        case Family::Zero:
            return 0.0;
        case Family::ExpGaussian: {
            if (amplitude_ == 0.0) return 0.0;
            if (lambda_ == 0.0) return kInf;
            const double h1_0 = std::abs(amplitude_) * width_ * std::exp(-0.5);
            return h1_0 * std::exp(-lambda_ * tau) / lambda_;
        }
        case Family::Table:
            return h1_integral(lags_.back()) - h1_integral(std::min(tau, lags_.back()));
    }
    return 0.0;
}

// ---- rates -----------------------------------------------------------------

RateFunction RateFunction::constant(double value) {
    if (value < 0.0) throw std::invalid_argument("rate: constant must be >= 0");
    RateFunction r;
    r.form = Form::Constant;
    r.base = value;
    return r;
}

RateFunction RateFunction::gaussian_bump(double base, double amp, Vec2 center, double width) {
    if (base < 0.0 || base + amp < 0.0) throw std::invalid_argument("rate: negative values");
    if (width <= 0.0) throw std::invalid_argument("rate: width must be > 0");
    RateFunction r;
    r.form = Form::GaussianBump;
    r.base = base;
    r.amp = amp;
    r.center = center;
    r.width = width;
    return r;
}

RateFunction RateFunction::plateau(double base, double amp, Vec2 center, double radius,
                                   double width) {
    if (base < 0.0 || base + amp < 0.0) throw std::invalid_argument("rate: negative values");
    if (width <= 0.0 || radius < 0.0) throw std::invalid_argument("rate: bad plateau shape");
    RateFunction r;
    r.form = Form::Plateau;
    r.base = base;
    r.amp = amp;
    r.center = center;
    r.radius = radius;
    r.width = width;
    return r;
}

double RateFunction::operator()(const Vec2& x) const {
    switch (form) {
        case Form::Constant:
            return base;
        case Form::GaussianBump: {
            const double r2 = (x - center).norm2();
            return base + amp * std::exp(-r2 / (2.0 * width * width));
        }
        case Form::Plateau: {
            const double r = (x - center).norm();
            return base + amp * 0.5 * (1.0 - std::tanh((r - radius) / width));
        }
    }
    return 0.0;
}

// ---- death -----------------------------------------------------------------

DeathRate DeathRate::zero() { return DeathRate{}; }

DeathRate DeathRate::total_mass(double gamma) {
    if (gamma < 0.0) throw std::invalid_argument("death rate: gamma must be >= 0");
    DeathRate d;
    d.form_ = Form::TotalMass;
    d.gamma_ = gamma;
    return d;
}

DeathRate DeathRate::convolution(double gamma, double height, double width) {
    if (gamma < 0.0 || height < 0.0) throw std::invalid_argument("death rate: negative intensity");
    if (width <= 0.0) throw std::invalid_argument("death rate: width must be > 0");
    DeathRate d;
    d.form_ = Form::Convolution;
    d.gamma_ = gamma;
    d.height_ = height;
    d.width_ = width;
    return d;
}

double DeathRate::bound_C() const {
    switch (form_) {
        case Form::Zero:
            return 0.0;
        case Form::TotalMass:
            return gamma_;
        case Form::Convolution:
            return gamma_ * height_;  // ||phi_w||_inf = height
    }
    return 0.0;
}

double DeathRate::bump(double r2) const {
    return height_ * std::exp(-r2 / (2.0 * width_ * width_));
}

double DeathRate::eval(const Vec2& x, const std::vector<Vec2>& alive, double scale_N) const {
    if (scale_N < 1.0) throw std::invalid_argument("eval_death: scale must be >= 1");
    switch (form_) {
        case Form::Zero:
            return 0.0;
        case Form::TotalMass:
            return gamma_ * static_cast<double>(alive.size()) / scale_N;
        case Form::Convolution: {
            double acc = 0.0;
            for (const Vec2& p : alive) acc += bump((x - p).norm2());
            return gamma_ * acc / scale_N;
        }
    }
    return 0.0;
}

// ---- initial condition -----------------------------------------------------

std::vector<Vec2> InitialCondition::sample(Stream& rng) const {
    switch (form) {
        case Form::Atoms:
            return atoms;
        case Form::Point:
            return std::vector<Vec2>(count, center);
        case Form::Gaussian: {
            std::vector<Vec2> out;
            out.reserve(count);
            for (std::uint64_t i = 0; i < count; ++i) out.push_back(center + width * rng.normal2());
            return out;
        }
        case Form::UniformDisc: {
            std::vector<Vec2> out;
            out.reserve(count);
            for (std::uint64_t i = 0; i < count; ++i) {
                const double r = radius * std::sqrt(rng.uniform());
                const double a = 2.0 * 3.14159265358979323846 * rng.uniform();
                out.push_back(center + Vec2{r * std::cos(a), r * std::sin(a)});
            }
            return out;
        }
    }
    return {};
}

double InitialCondition::density(const Vec2& x) const {
    switch (form) {
        case Form::Gaussian: {
            const double r2 = (x - center).norm2();
            const double w2 = width * width;
            return std::exp(-r2 / (2.0 * w2)) / (2.0 * 3.14159265358979323846 * w2);
        }
        case Form::UniformDisc: {
            const double r2 = (x - center).norm2();
            return r2 <= radius * radius ? 1.0 / (3.14159265358979323846 * radius * radius) : 0.0;
        }
        default:
            return 0.0;
    }
}

// ---- audit -----------------------------------------------------------------

bool AuditReport::all_certified_pass() const {
    for (const auto& e : entries)
        if (e.status == AuditStatus::Fail) return false;
    return true;
}

const AuditEntry* AuditReport::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

AuditReport audit_assumptions(const ModelSpec& spec, const AuditPlan& plan) {
    if (plan.samples == 0) throw std::invalid_argument("audit: sampling plan is empty");
    Stream rng(plan.seed);
    auto probe_x = [&]() {
        return Vec2{(2.0 * rng.uniform() - 1.0) * plan.extent,
                    (2.0 * rng.uniform() - 1.0) * plan.extent};
    };

    AuditReport report;
    const auto& K = spec.kernel;

    {  // (L_1): |L_t(x)| <= h1(t)
        double worst = 0.0;
        for (std::size_t i = 0; i < plan.samples; ++i) {
            const double t = rng.uniform() * plan.t_max;
            const Vec2 x = probe_x();
            worst = std::max(worst, K.eval(t, x).norm() - K.h1(t));
        }
        report.entries.push_back({"L1_bound", worst > 0.0 ? AuditStatus::Fail : AuditStatus::Pass,
                                  std::max(worst, 0.0), "|L_t(x)| - h1(t), max over sample"});
    }
    {  // (L_2): |L_t(x) - L_t(y)| <= h2(t) |x - y|
        double worst = 0.0;
        for (std::size_t i = 0; i < plan.samples; ++i) {
            const double t = rng.uniform() * plan.t_max;
            const Vec2 x = probe_x(), y = probe_x();
            const double lhs = (K.eval(t, x) - K.eval(t, y)).norm();
            worst = std::max(worst, lhs - K.h2(t) * (x - y).norm());
        }
        report.entries.push_back({"L2_lipschitz", worst > 0.0 ? AuditStatus::Fail : AuditStatus::Pass,
                                  std::max(worst, 0.0), "|L_t(x)-L_t(y)| - h2(t)|x-y|, max over sample"});
    }
    {  // h1 integrability and the tau_mem tail contract
        const double tail = K.h1_tail(K.tau_mem());
        const bool integrable = std::isfinite(K.h1_tail(0.0));
        AuditEntry e;
        e.name = "h1_integrable";
        if (!integrable) {
            e.status = AuditStatus::Fail;
            e.max_violation = kInf;
            e.detail = "h1 has no finite integral (lambda == 0 preset); memory cannot be truncated";
        } else {
            const double excess = tail - K.tail_epsilon();
            e.status = excess > 0.0 ? AuditStatus::Fail : AuditStatus::Pass;
            e.max_violation = std::max(excess, 0.0);
            e.detail = "tail integral of h1 beyond tau_mem vs declared epsilon";
        }
        report.entries.push_back(std::move(e));
    }
    {  // b1 <= B1, b2 <= B2
        double w1 = 0.0, w2 = 0.0;
        for (std::size_t i = 0; i < plan.samples; ++i) {
            const Vec2 x = probe_x();
            w1 = std::max(w1, spec.rates.b1(x) - spec.rates.B1);
            w2 = std::max(w2, spec.rates.b2(x) - spec.rates.B2);
        }
        report.entries.push_back({"b1_bound", w1 > 0.0 ? AuditStatus::Fail : AuditStatus::Pass,
                                  std::max(w1, 0.0), "b1(x) - B1, max over sample"});
        report.entries.push_back({"b2_bound", w2 > 0.0 ? AuditStatus::Fail : AuditStatus::Pass,
                                  std::max(w2, 0.0), "b2(x) - B2, max over sample"});
    }
    {  // (d_1): d(x, nu) <= C <nu, 1> over random atom clouds
        double worst = 0.0;
        const std::size_t clouds = std::max<std::size_t>(1, plan.samples / 100);
        for (std::size_t c = 0; c < clouds; ++c) {
            const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 20.0);
            std::vector<Vec2> cloud;
            cloud.reserve(n);
            for (std::size_t i = 0; i < n; ++i) cloud.push_back(probe_x());
            const Vec2 x = probe_x();
            const double d = spec.death.eval(x, cloud, 1.0);
            worst = std::max(worst, d - spec.death.bound_C() * static_cast<double>(n));
        }
        report.entries.push_back({"d1_bound", worst > 0.0 ? AuditStatus::Fail : AuditStatus::Pass,
                                  std::max(worst, 0.0), "d(x,nu) - C<nu,1>, max over sampled clouds"});
    }
    {  // (d_2): Lipschitz-in-measure witness Psi
        AuditEntry e;
        e.name = "d2_witness";
        switch (spec.death.form()) {
            case DeathRate::Form::Zero:
                e.status = AuditStatus::Pass;
                e.detail = "zero death: Psi == 0";
                break;
            case DeathRate::Form::TotalMass:
                e.status = AuditStatus::Pass;
                e.detail = "total-mass death: Psi == gamma is an exact witness";
                break;
            case DeathRate::Form::Convolution:
                e.status = AuditStatus::NotCertified;
                e.detail =
                    "convolution death: no x-independent witness is known; only checked via (d_1)";
                break;
        }
        report.entries.push_back(std::move(e));
    }
    return report;
}

}  // namespace myco
