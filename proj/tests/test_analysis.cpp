#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "myco/analysis.hpp"
#include "testutil.hpp"

using namespace myco;

namespace {

ModelSpec quiet_model(std::size_t atoms) {
    ModelSpec m;
    m.rates.b1 = RateFunction::constant(0.0);
    m.rates.b2 = RateFunction::constant(0.0);
    m.rates.B1 = 0.0;
    m.rates.B2 = 0.0;
    m.death = DeathRate::zero();
    m.initial.form = InitialCondition::Form::Point;
    m.initial.count = atoms;
    return m;
}

Snapshot snapshot_of(std::vector<Vec2> pos) {
    Snapshot s;
    for (std::size_t i = 0; i < pos.size(); ++i) s.labels.push_back(i + 1);
    s.positions = std::move(pos);
    return s;
}

}  // namespace

TEST_CASE("pairing: atoms against the constant function") {
    const auto one = TestFunction::constant(1.0);
    CHECK(pairing(snapshot_of({}), one, 1.0) == 0.0);
    CHECK(pairing(snapshot_of(std::vector<Vec2>(5, {0.3, 0.1})), one, 1.0) == doctest::Approx(5.0));
    CHECK(pairing(snapshot_of(std::vector<Vec2>(5, {0.3, 0.1})), one, 5.0) == doctest::Approx(1.0));
}

TEST_CASE("pairing: unit-mass Gaussian field against 1 is 1 to quadrature tolerance") {
    GridSpec g;
    g.extent = 4.0;
    g.h = 0.05;
    std::vector<double> rho(g.n() * g.n());
    for (std::size_t i = 0; i < g.n(); ++i)
        for (std::size_t j = 0; j < g.n(); ++j) {
            const Vec2 x{g.x_of(i), g.x_of(j)};
            rho[g.index(i, j)] = std::exp(-x.norm2() / 0.5) / (0.5 * 3.14159265358979323846);
        }
    CHECK(pairing(rho, g, TestFunction::constant(1.0)) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("pairing is linear in f and additive over disjoint atom sets") {
    const auto ga = TestFunction::gaussian({0.5, 0.0}, 0.7);
    const Snapshot a = snapshot_of({{0.1, 0.2}, {-0.3, 0.4}});
    const Snapshot b = snapshot_of({{1.0, -1.0}});
    Snapshot both = snapshot_of({{0.1, 0.2}, {-0.3, 0.4}, {1.0, -1.0}});
    CHECK(pairing(both, ga, 2.0) ==
          doctest::Approx(pairing(a, ga, 2.0) + pairing(b, ga, 2.0)).epsilon(1e-14));
}

TEST_CASE("test functions: gradient and hessian agree with finite differences") {
    Stream rng(4);
    const std::vector<TestFunction> fns = {TestFunction::gaussian({0.3, -0.2}, 0.8),
                                           TestFunction::coordinate(0, 1.5),
                                           TestFunction::coordinate(1, 2.0)};
    const double eps = 1e-5;
    for (const auto& f : fns) {
        for (int i = 0; i < 500; ++i) {
            const Vec2 x{6.0 * (rng.uniform() - 0.5), 6.0 * (rng.uniform() - 0.5)};
            const Vec2 g = f.gradient(x);
            const double gx =
                (f.value({x.x + eps, x.y}) - f.value({x.x - eps, x.y})) / (2.0 * eps);
            const double gy =
                (f.value({x.x, x.y + eps}) - f.value({x.x, x.y - eps})) / (2.0 * eps);
            CHECK(g.x == doctest::Approx(gx).epsilon(1e-4).scale(1.0));
            CHECK(g.y == doctest::Approx(gy).epsilon(1e-4).scale(1.0));
            const Vec2 h = f.hessian_diag(x);
            const double hx = (f.value({x.x + eps, x.y}) - 2.0 * f.value(x) +
                               f.value({x.x - eps, x.y})) /
                              (eps * eps);
            const double hy = (f.value({x.x, x.y + eps}) - 2.0 * f.value(x) +
                               f.value({x.x, x.y - eps})) /
                              (eps * eps);
            CHECK(h.x == doctest::Approx(hx).epsilon(5e-3).scale(1.0));
            CHECK(h.y == doctest::Approx(hy).epsilon(5e-3).scale(1.0));
        }
    }
}

TEST_CASE("martingale residual: frozen dynamics give exactly zero") {
    RunConfig cfg;
    cfg.model = quiet_model(4);
    cfg.horizon = 1.0;
    cfg.dt = 0.1;
    const RunResult res = run(cfg);
    for (const TestFunction& f :
         {TestFunction::constant(1.0), TestFunction::gaussian({0.0, 0.0}, 1.0)}) {
        for (double m : martingale_residual(res, f, cfg.model)) CHECK(m == 0.0);
    }
}

TEST_CASE("martingale residual: deterministic drift-only config vanishes at rate O(dt)") {
    auto max_residual = [&](double dt) {
        RunConfig cfg;
        cfg.model = quiet_model(3);
        cfg.model.initial.form = InitialCondition::Form::Gaussian;
        cfg.model.initial.width = 0.5;
        cfg.model.initial.count = 3;
        const std::vector<double> lg{0.0, 10.0}, ax{-9.0, 9.0};
        cfg.model.kernel = InteractionKernel::tabulated(
            lg, ax, ax, std::vector<Vec2>(8, Vec2{0.2, 0.0}),
            {0.2 * std::sqrt(2.0), 0.2 * std::sqrt(2.0)}, {0.0, 0.0});
        cfg.horizon = 1.0;
        cfg.dt = dt;
        cfg.seed = 9;
        const RunResult res = run(cfg);
        const auto ms = martingale_residual(res, TestFunction::coordinate(0, 4.0), cfg.model);
        double worst = 0.0;
        for (double m : ms) worst = std::max(worst, std::abs(m));
        return worst;
    };
    const double e0 = max_residual(0.05);
    const double e1 = max_residual(0.025);
    CHECK(e1 < e0);
    CHECK(e0 / e1 >= 1.5);
}

TEST_CASE("moment audit: frozen and Yule configs pass, understated bound fails") {
    RunConfig cfg;
    cfg.model = quiet_model(20);
    cfg.model.rates.b1 = RateFunction::constant(1.0);
    cfg.model.rates.B1 = 1.0;
    cfg.horizon = 1.0;
    cfg.dt = 0.1;
    cfg.snapshot_stride = 2;
    cfg.population_cap = 100000;
    cfg.seed = 3;
    const ReplicaStats stats = run_replicas(cfg, 200);

    const MomentAudit ok = moment_audit(stats, cfg.model);
    CHECK(ok.all_pass());
    // near-equality at the end: bound m0 e^{B1 t} equals the Yule mean
    const auto& last = ok.rows.back();
    CHECK(last.mean_mass <= last.bound_mass + 3.0 * last.se_mass);
    CHECK(last.mean_mass >= last.bound_mass - 6.0 * last.se_mass);

    // deliberately understated B1 must fail (negative test)
    ModelSpec lying = cfg.model;
    lying.rates.B1 = 0.5;
    CHECK(!moment_audit(stats, lying).all_pass());

    // frozen config: constant count, large slack
    RunConfig frozen;
    frozen.model = quiet_model(20);
    frozen.horizon = 1.0;
    frozen.dt = 0.25;
    const MomentAudit fz = moment_audit(run_replicas(frozen, 5), frozen.model);
    CHECK(fz.all_pass());
    for (const auto& row : fz.rows) CHECK(row.mean_mass == doctest::Approx(20.0));
}

TEST_CASE("tail mass") {
    const Snapshot origin = snapshot_of(std::vector<Vec2>(7, {0.0, 0.0}));
    CHECK(tail_mass(origin, 1.0, 1.0) == 0.0);
    const Snapshot off = snapshot_of({{0.5, 0.0}, {1.5, 0.0}, {3.0, 0.0}});
    CHECK(tail_mass(off, 0.0, 1.0) == doctest::Approx(3.0));  // strictly outside 0
    // nonincreasing in R
    double prev = tail_mass(off, 0.0, 1.0);
    for (double R : {0.4, 0.9, 1.4, 2.9, 3.5}) {
        const double v = tail_mass(off, R, 1.0);
        CHECK(v <= prev);
        prev = v;
    }
    CHECK_THROWS_AS(tail_mass(off, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("convergence study: frozen dynamics floor is independent of N") {
    RunConfig base;
    base.model = quiet_model(100);
    base.model.initial.center = {0.3, 0.0};
    base.model.scale_N = 100;
    base.horizon = 0.2;
    base.dt = 0.05;
    base.snapshot_stride = 2;
    base.seed = 21;

    MeanFieldConfig mf;
    mf.model = base.model;
    mf.grid.extent = 2.0;
    mf.grid.h = 0.05;
    mf.dt = 0.05;
    mf.horizon = 0.2;
    mf.snapshot_stride = 2;
    MeanFieldSolver solver(mf);
    const MeanFieldResult pde = solver.evolve();

    TestFunctionDictionary dict;
    dict.functions = {TestFunction::constant(1.0), TestFunction::gaussian({0.0, 0.0}, 0.8)};
    const ConvergenceReport rep =
        convergence_study(base, {100, 400}, {2, 2}, dict, pde);
    REQUIRE(rep.entries.size() == 2);
    CHECK(rep.entries[0].err == doctest::Approx(rep.entries[1].err).epsilon(1e-9));
    CHECK(rep.entries[0].err < 0.05);  // smoothing floor only
}

TEST_CASE("convergence study: argument validation") {
    RunConfig base;
    base.model = quiet_model(10);
    MeanFieldResult pde;
    TestFunctionDictionary dict = TestFunctionDictionary::standard();
    CHECK_THROWS_AS(convergence_study(base, {100}, {1}, dict, pde), std::invalid_argument);
    CHECK_THROWS_AS(convergence_study(base, {100, 50}, {1, 1}, dict, pde), std::invalid_argument);
    CHECK_THROWS_AS(convergence_study(base, {100, 200}, {1}, dict, pde), std::invalid_argument);
    MeanFieldResult tagged;
    tagged.model_hash = 7;
    CHECK_THROWS_AS(convergence_study(base, {100, 200}, {1, 1}, dict, tagged, 9),
                    std::invalid_argument);
}
