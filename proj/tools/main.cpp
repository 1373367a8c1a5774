// Command-line front end: simulate / meanfield / compare / validate / replay.
// Exit codes: 0 success, 1 usage, 2 capacity, 3 numerical, 4 validation failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "myco/analysis.hpp"
#include "myco/config.hpp"
#include "myco/engine.hpp"
#include "myco/io.hpp"
#include "myco/meanfield.hpp"

namespace fs = std::filesystem;
using namespace myco;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitCapacity = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitValidation = 4;

// environment overrides, documented prefix MYCO_
std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> replicas;
    std::optional<unsigned> threads;

    void pull_env() {
        if (auto v = env("MYCO_SEED"); v && !seed) seed = std::stoull(*v);
        if (auto v = env("MYCO_OUT"); v && !out) out = *v;
        if (auto v = env("MYCO_REPLICAS"); v && !replicas) replicas = std::stoull(*v);
        if (auto v = env("MYCO_THREADS"); v && !threads)
            threads = static_cast<unsigned>(std::stoul(*v));
    }
};

ExperimentConfig load_or_exit(const std::string& path, bool strict, const Overrides& ov) {
    ParseOutcome out = load_config(path, strict);
    if (!out.ok) {
        std::cerr << "config validation failed (" << out.errors.size() << " error(s)):\n";
        for (const auto& e : out.errors) std::cerr << "  - " << e << "\n";
        std::exit(kExitValidation);
    }
    ExperimentConfig cfg = std::move(out.config);
    if (ov.seed) cfg.run.seed = *ov.seed;
    if (ov.out) cfg.output.directory = *ov.out;
    if (ov.replicas) cfg.replica_count = *ov.replicas;
    if (ov.threads) cfg.run.threads = *ov.threads;
    // re-normalise so the stored canonical form (and hash) tracks what runs
    ParseOutcome re = parse_config(serialize_config(cfg), true);
    if (re.ok) cfg.canonical = re.config.canonical;
    return cfg;
}

int run_simulate(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.output.directory);
    const std::string tag = cfg.hash_hex();
    write_text_file(cfg.output.directory + "/config_" + tag + ".json", cfg.canonical + "\n");

    ReplicaStats stats;
    for (std::size_t r = 0; r < cfg.replica_count; ++r) {
        RunConfig rc = cfg.run;
        rc.seed = derive_seed(cfg.run.seed, "replica", r);
        const RunResult res = run(rc);
        const std::string suffix = tag + "_r" + std::to_string(r);
        if (cfg.output.snapshots)
            write_text_file(cfg.output.directory + "/snapshots_" + suffix + ".ndjson",
                            snapshots_to_ndjson(res.snapshots));
        if (cfg.output.events)
            write_text_file(cfg.output.directory + "/events_" + suffix + ".ndjson",
                            events_to_ndjson(res.history));
        if (cfg.output.trajectories)
            write_text_file(cfg.output.directory + "/trajectories_" + suffix + ".csv",
                            trajectories_to_csv(res.history));
        if (res.status != RunStatus::Ok) {
            std::cerr << "replica " << r << ": " << res.message << " (partial results written)\n";
            return res.status == RunStatus::CapacityExceeded ? kExitCapacity : kExitNumerical;
        }
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
    }
    if (cfg.output.reports) {
        write_text_file(cfg.output.directory + "/stats_" + tag + ".csv",
                        replica_stats_to_csv(stats));
        const MomentAudit audit = moment_audit(stats, cfg.run.model);
        std::string nd;
        for (const auto& row : audit.rows) {
            nd += "{\"t\":" + format_double(row.t) +
                  ",\"mean_mass\":" + format_double(row.mean_mass) +
                  ",\"bound_mass\":" + format_double(row.bound_mass) +
                  ",\"mass_ok\":" + (row.mass_ok ? std::string("true") : std::string("false")) +
                  ",\"config\":\"" + tag + "\",\"seed\":" + std::to_string(cfg.run.seed) +
                  ",\"version\":\"" + kToolVersion + "\"}\n";
        }
        write_text_file(cfg.output.directory + "/moment_audit_" + tag + ".ndjson", nd);
        if (!audit.all_pass())
            std::cerr << "warning: moment-bound audit failed at some snapshot (see report)\n";
    }
    std::cout << "simulate: " << cfg.replica_count << " replica(s), outputs under "
              << cfg.output.directory << " (config " << tag << ")\n";
    return kExitOk;
}

int run_meanfield(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.output.directory);
    const std::string tag = cfg.hash_hex();
    write_text_file(cfg.output.directory + "/config_" + tag + ".json", cfg.canonical + "\n");
    MeanFieldSolver solver(cfg.meanfield);
    MeanFieldResult res = solver.evolve();
    for (std::size_t k = 0; k < res.snapshot_times.size(); ++k) {
        std::ostringstream name;
        name << cfg.output.directory << "/field_" << tag << "_" << k << ".csv";
        write_text_file(name.str(),
                        field_to_csv(res.grid, res.snapshot_times[k], res.snapshots[k]));
    }
    write_text_file(cfg.output.directory + "/monitors_" + tag + ".csv",
                    monitors_to_csv(res.monitors));
    std::cout << "meanfield: " << res.snapshot_times.size() << " field snapshot(s), final mass "
              << format_double(res.monitors.empty() ? 0.0 : res.monitors.back().mass)
              << ", total leak " << format_double(res.total_leak) << "\n";
    return kExitOk;
}

int run_compare(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& n_list) {
    if (n_list.size() < 2) {
        std::cerr << "compare: --n-list needs at least two N values\n";
        return kExitUsage;
    }
    fs::create_directories(cfg.output.directory);
    const std::string tag = cfg.hash_hex();

    // align the mean-field snapshot grid with the particle snapshots
    MeanFieldConfig mf = cfg.meanfield;
    const double snap_dt = cfg.run.dt * static_cast<double>(cfg.run.snapshot_stride);
    const double ratio = snap_dt / mf.dt;
    if (std::abs(ratio - static_cast<double>(std::llround(ratio))) > 1e-9) {
        std::cerr << "compare: run.dt * run.snapshot_stride must be a multiple of meanfield.dt\n";
        return kExitUsage;
    }
    mf.snapshot_stride = static_cast<std::size_t>(std::llround(ratio));
    mf.horizon = cfg.run.horizon;
    MeanFieldSolver solver(mf);
    MeanFieldResult pde = solver.evolve();
    pde.model_hash = cfg.hash();

    // replicas per N: the configured count at the smallest N, scaled down like
    // 1/sqrt(N) (fluctuations shrink with N), never below 2
    std::vector<std::size_t> reps;
    for (std::uint64_t n : n_list) {
        const double scale =
            std::sqrt(static_cast<double>(n_list.front()) / static_cast<double>(n));
        reps.push_back(std::max<std::size_t>(
            2, static_cast<std::size_t>(
                   std::llround(static_cast<double>(cfg.replica_count) * scale))));
    }

    const ConvergenceReport rep =
        convergence_study(cfg.run, n_list, reps, cfg.dictionary, pde, cfg.hash());

    std::string csv = "N,replicas,err\n";
    std::string nd;
    for (const auto& e : rep.entries) {
        csv += std::to_string(e.N) + ',' + std::to_string(e.replicas) + ',' +
               format_double(e.err) + '\n';
        nd += "{\"N\":" + std::to_string(e.N) + ",\"replicas\":" + std::to_string(e.replicas) +
              ",\"err\":" + format_double(e.err) + ",\"config\":\"" + tag +
              "\",\"seed\":" + std::to_string(cfg.run.seed) + ",\"version\":\"" + kToolVersion +
              "\"}\n";
        std::cout << "N = " << e.N << " (" << e.replicas << " replicas): err = " << e.err << "\n";
    }
    write_text_file(cfg.output.directory + "/convergence_" + tag + ".csv", csv);
    write_text_file(cfg.output.directory + "/convergence_" + tag + ".ndjson", nd);
    std::cout << "err(N_min)/err(N_max) = " << rep.ratio_first_last << "\n";
    return kExitOk;
}

int run_validate(const ExperimentConfig& cfg) {
    bool ok = true;
    auto line = [&](bool pass, const std::string& name, const std::string& detail) {
        std::cout << (pass ? "[ok]   " : "[FAIL] ") << name << (detail.empty() ? "" : ": " + detail)
                  << "\n";
        ok = ok && pass;
    };

    // structural assumptions of the model
    AuditPlan plan;
    plan.samples = 10000;
    const AuditReport audit = audit_assumptions(cfg.run.model, plan);
    for (const auto& e : audit.entries) {
        const bool pass = e.status != AuditStatus::Fail;
        std::string detail = e.detail;
        if (e.status == AuditStatus::NotCertified) detail = "not certified; " + detail;
        if (!pass) detail += " (max violation " + format_double(e.max_violation) + ")";
        line(pass, "audit." + e.name, detail);
    }

    // kernel preset spot oracle: the envelope peak is attained at |x| = w
    if (cfg.run.model.kernel.family() == InteractionKernel::Family::ExpGaussian) {
        const auto& K = cfg.run.model.kernel;
        const double expect = std::abs(K.amplitude()) * K.width() * std::exp(-0.5);
        const double got = K.eval(0.0, {K.width(), 0.0}).norm();
        line(std::abs(got - expect) <= 1e-9 * expect, "kernel.preset_peak",
             "|L_0| at |x| = w equals h1(0)");
    }

    // determinism: two short runs from the same seed must agree byte for byte
    {
        RunConfig rc = cfg.run;
        rc.horizon = std::min(cfg.run.horizon, 4.0 * cfg.run.dt);
        const RunResult a = run(rc);
        const RunResult b = run(rc);
        line(snapshots_to_ndjson(a.snapshots) == snapshots_to_ndjson(b.snapshots),
             "engine.replay_determinism", "");
    }

    // moment bounds at smoke scale
    {
        RunConfig rc = cfg.run;
        rc.horizon = std::min(cfg.run.horizon, 20.0 * cfg.run.dt);
        rc.snapshot_stride = 5;
        try {
            const ReplicaStats stats = run_replicas(rc, 20);
            line(moment_audit(stats, rc.model).all_pass(), "engine.moment_bounds",
                 "20 replicas, short horizon");
        } catch (const std::exception& e) {
            line(false, "engine.moment_bounds", e.what());
        }
    }

    // mean-field mass identity at smoke scale
    {
        MeanFieldConfig mfc = cfg.meanfield;
        mfc.horizon = 10.0 * mfc.dt;
        mfc.snapshot_stride = 1000000;
        try {
            MeanFieldSolver solver(mfc);
            const MeanFieldResult res = solver.evolve();
            bool pass = true;
            for (const auto& m : res.monitors)
                pass = pass && std::abs(m.residual) <= 1e-8 * (1.0 + m.mass);
            line(pass, "meanfield.mass_identity", "10 steps");
        } catch (const std::exception& e) {
            line(false, "meanfield.mass_identity", e.what());
        }
    }

    std::cout << (ok ? "validate: all checks passed\n" : "validate: FAILURES above\n");
    return ok ? kExitOk : kExitValidation;
}

int run_replay(const std::string& run_dir, const std::string& out_dir) {
    std::vector<fs::path> configs;
    if (fs::exists(run_dir))
        for (const auto& e : fs::directory_iterator(run_dir)) {
            const std::string name = e.path().filename().string();
            if (name.rfind("config_", 0) == 0 && e.path().extension() == ".json")
                configs.push_back(e.path());
        }
    if (configs.size() != 1) {
        std::cerr << "replay: expected exactly one config_<hash>.json under " << run_dir << "\n";
        return kExitUsage;
    }
    ParseOutcome out = load_config(configs.front().string(), true);
    if (!out.ok) {
        for (const auto& e : out.errors) std::cerr << "  - " << e << "\n";
        return kExitValidation;
    }
    ExperimentConfig cfg = std::move(out.config);
    const std::string stored_tag = cfg.hash_hex();
    cfg.output.directory = out_dir.empty() ? run_dir + "/replay" : out_dir;
    cfg.output.snapshots = true;
    // the directory override must not change the identity of the run
    ParseOutcome re = parse_config(serialize_config(cfg), true);
    if (re.ok) cfg.canonical = re.config.canonical;

    const int code = run_simulate(cfg);
    if (code != kExitOk) return code;

    bool identical = true;
    for (std::size_t r = 0; r < cfg.replica_count; ++r) {
        const std::string orig_name =
            "snapshots_" + stored_tag + "_r" + std::to_string(r) + ".ndjson";
        const std::string redo_name =
            "snapshots_" + cfg.hash_hex() + "_r" + std::to_string(r) + ".ndjson";
        const fs::path orig = fs::path(run_dir) / orig_name;
        const fs::path redo = fs::path(cfg.output.directory) / redo_name;
        if (!fs::exists(orig) || !fs::exists(redo)) {
            std::cerr << "replay: missing snapshot stream for replica " << r << "\n";
            identical = false;
            continue;
        }
        if (read_text_file(orig.string()) != read_text_file(redo.string())) {
            std::cerr << "replay: replica " << r << " differs\n";
            identical = false;
        }
    }
    std::cout << (identical ? "replay: byte-identical\n" : "replay: MISMATCH\n");
    return identical ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interacting spatial birth-death simulator with ancestral branching, "
                 "its mean-field density solver, and the validation harness"};
    app.require_subcommand(1);

    std::string config_path, out_dir, n_list_str = "100,1000,10000", run_dir;
    bool strict = true;
    std::uint64_t seed = 0;
    std::size_t replicas = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config (JSON)")->required();
        sub->add_flag("--strict,!--no-strict", strict, "reject unknown config keys (default on)");
        sub->add_option("--out", out_dir, "output directory override");
        sub->add_option("--seed", seed, "master seed override");
        sub->add_option("--replicas", replicas, "replica count override");
    };

    CLI::App* sim = app.add_subcommand("simulate", "run the particle engine");
    add_common(sim);
    CLI::App* mf = app.add_subcommand("meanfield", "solve the limiting density equation");
    add_common(mf);
    CLI::App* cmp = app.add_subcommand("compare", "empirical-vs-mean-field convergence study");
    add_common(cmp);
    cmp->add_option("--n-list", n_list_str, "comma-separated population scales (>= 2)");
    CLI::App* val = app.add_subcommand("validate", "run the oracle / invariant suite");
    add_common(val);
    CLI::App* rep = app.add_subcommand("replay", "re-run a stored output byte-identically");
    rep->add_option("--run", run_dir, "directory of a previous simulate run")->required();
    rep->add_option("--out", out_dir, "where to write the replayed outputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    Overrides ov;
    if (sim->count("--seed") || mf->count("--seed") || cmp->count("--seed") ||
        val->count("--seed"))
        ov.seed = seed;
    if (!out_dir.empty()) ov.out = out_dir;
    if (replicas > 0) ov.replicas = replicas;
    ov.pull_env();

    try {
        if (rep->parsed()) return run_replay(run_dir, out_dir);
        const ExperimentConfig cfg = load_or_exit(config_path, strict, ov);
        if (sim->parsed()) return run_simulate(cfg);
        if (mf->parsed()) return run_meanfield(cfg);
        if (val->parsed()) return run_validate(cfg);
        if (cmp->parsed()) {
            std::vector<std::uint64_t> ns;
            std::stringstream ss(n_list_str);
            std::string item;
            while (std::getline(ss, item, ',')) ns.push_back(std::stoull(item));
            return run_compare(cfg, ns);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitUsage;
}
