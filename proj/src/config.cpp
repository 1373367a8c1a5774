#include "myco/config.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "myco/io.hpp"

namespace myco {

using json = nlohmann::json;

namespace {

// Duplicate-key detection: the DOM parser silently keeps the last duplicate,
// so scan the token stream first.
void find_duplicate_keys(const std::string& text, std::vector<std::string>& errors) {
    std::vector<std::set<std::string>> stack;
    json::parser_callback_t cb = [&](int, json::parse_event_t event, json& parsed) {
        switch (event) {
            case json::parse_event_t::object_start:
                stack.emplace_back();
                break;
            case json::parse_event_t::object_end:
                if (!stack.empty()) stack.pop_back();
                break;
            case json::parse_event_t::key: {
                const std::string key = parsed.get<std::string>();
                if (!stack.empty() && !stack.back().insert(key).second)
                    errors.push_back("duplicate key: " + key);
                break;
            }
            default:
                break;
        }
        return true;
    };
    try {
        const json scanned = json::parse(text, cb);
        (void)scanned;
    } catch (const json::exception&) {
        // reported by the main parse
    }
}

struct Ctx {
    std::vector<std::string>& errors;
    bool strict;

    void error(const std::string& path, const std::string& what) {
        errors.push_back(path + ": " + what);
    }

    void check_keys(const json& obj, const std::string& path,
                    const std::set<std::string>& known) {
        if (!strict || !obj.is_object()) return;
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!known.count(it.key())) error(path, "unknown key '" + it.key() + "'");
    }

    double num(const json& obj, const std::string& path, const char* key, double dflt,
               double lo = -1e300, double hi = 1e300) {
        if (!obj.contains(key)) return dflt;
        if (!obj[key].is_number()) {
            error(path + "." + key, "expected a number");
            return dflt;
        }
        const double v = obj[key].get<double>();
        if (v < lo || v > hi) {
            error(path + "." + key, "out of range [" + std::to_string(lo) + ", " +
                                        std::to_string(hi) + "]");
            return dflt;
        }
        return v;
    }

    std::uint64_t uint(const json& obj, const std::string& path, const char* key,
                       std::uint64_t dflt, std::uint64_t lo = 0) {
        if (!obj.contains(key)) return dflt;
        if (!obj[key].is_number_unsigned() && !obj[key].is_number_integer()) {
            error(path + "." + key, "expected a nonnegative integer");
            return dflt;
        }
        const auto v = obj[key].get<std::int64_t>();
        if (v < 0 || static_cast<std::uint64_t>(v) < lo) {
            error(path + "." + key, "must be >= " + std::to_string(lo));
            return dflt;
        }
        return static_cast<std::uint64_t>(v);
    }

    std::string str(const json& obj, const std::string& path, const char* key,
                    const std::string& dflt) {
        if (!obj.contains(key)) return dflt;
        if (!obj[key].is_string()) {
            error(path + "." + key, "expected a string");
            return dflt;
        }
        return obj[key].get<std::string>();
    }

    bool flag(const json& obj, const std::string& path, const char* key, bool dflt) {
        if (!obj.contains(key)) return dflt;
        if (!obj[key].is_boolean()) {
            error(path + "." + key, "expected a boolean");
            return dflt;
        }
        return obj[key].get<bool>();
    }

    Vec2 vec(const json& obj, const std::string& path, const char* key, Vec2 dflt) {
        if (!obj.contains(key)) return dflt;
        const json& v = obj[key];
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            error(path + "." + key, "expected [x, y]");
            return dflt;
        }
        return {v[0].get<double>(), v[1].get<double>()};
    }
};

RateFunction parse_rate(const json& obj, const std::string& path, Ctx& ctx) {
    if (!obj.is_object()) {
        if (obj.is_number()) return RateFunction::constant(std::max(0.0, obj.get<double>()));
        ctx.error(path, "expected a rate object or number");
        return RateFunction::constant(0.0);
    }
    const std::string form = ctx.str(obj, path, "form", "constant");
    try {
        if (form == "constant") {
            ctx.check_keys(obj, path, {"form", "value"});
            return RateFunction::constant(ctx.num(obj, path, "value", 0.0, 0.0));
        }
        if (form == "gaussian_bump") {
            ctx.check_keys(obj, path, {"form", "base", "amp", "center", "width"});
            return RateFunction::gaussian_bump(ctx.num(obj, path, "base", 0.0, 0.0),
                                               ctx.num(obj, path, "amp", 0.0),
                                               ctx.vec(obj, path, "center", {0.0, 0.0}),
                                               ctx.num(obj, path, "width", 1.0, 1e-12));
        }
        if (form == "plateau") {
            ctx.check_keys(obj, path, {"form", "base", "amp", "center", "radius", "width"});
            return RateFunction::plateau(ctx.num(obj, path, "base", 0.0, 0.0),
                                         ctx.num(obj, path, "amp", 0.0),
                                         ctx.vec(obj, path, "center", {0.0, 0.0}),
                                         ctx.num(obj, path, "radius", 1.0, 0.0),
                                         ctx.num(obj, path, "width", 0.25, 1e-12));
        }
    } catch (const std::exception& e) {
        ctx.error(path, e.what());
        return RateFunction::constant(0.0);
    }
    ctx.error(path + ".form", "unknown rate form '" + form + "'");
    return RateFunction::constant(0.0);
}

InteractionKernel parse_kernel(const json& obj, const std::string& path, Ctx& ctx) {
    const std::string family = ctx.str(obj, path, "family", "zero");
    try {
        if (family == "zero") {
            ctx.check_keys(obj, path, {"family"});
            return InteractionKernel::zero();
        }
        if (family == "exp_gaussian") {
            ctx.check_keys(obj, path,
                           {"family", "amplitude", "lambda", "width", "mode", "tail_epsilon"});
            const std::string mode = ctx.str(obj, path, "mode", "attract");
            if (mode != "attract" && mode != "repel")
                ctx.error(path + ".mode", "expected 'attract' or 'repel'");
            return InteractionKernel::exp_gaussian(
                ctx.num(obj, path, "amplitude", 1.0), ctx.num(obj, path, "lambda", 1.0, 0.0),
                ctx.num(obj, path, "width", 1.0, 1e-12), mode != "repel",
                ctx.num(obj, path, "tail_epsilon", 1e-6, 1e-300));
        }
        if (family == "table") {
            ctx.check_keys(obj, path, {"family", "file", "envelope_file"});
            const std::string file = ctx.str(obj, path, "file", "");
            const std::string env = ctx.str(obj, path, "envelope_file", "");
            if (file.empty() || env.empty()) {
                ctx.error(path, "table kernel requires 'file' and 'envelope_file'");
                return InteractionKernel::zero();
            }
            return InteractionKernel::from_csv(file, env);
        }
    } catch (const std::exception& e) {
        ctx.error(path, e.what());
        return InteractionKernel::zero();
    }
    ctx.error(path + ".family", "unknown kernel family '" + family + "'");
    return InteractionKernel::zero();
}

DeathRate parse_death(const json& obj, const std::string& path, Ctx& ctx) {
    const std::string form = ctx.str(obj, path, "form", "zero");
    try {
        if (form == "zero") {
            ctx.check_keys(obj, path, {"form"});
            return DeathRate::zero();
        }
        if (form == "total_mass") {
            ctx.check_keys(obj, path, {"form", "gamma"});
            return DeathRate::total_mass(ctx.num(obj, path, "gamma", 0.0, 0.0));
        }
        if (form == "convolution") {
            ctx.check_keys(obj, path, {"form", "gamma", "height", "width"});
            return DeathRate::convolution(ctx.num(obj, path, "gamma", 0.0, 0.0),
                                          ctx.num(obj, path, "height", 1.0, 0.0),
                                          ctx.num(obj, path, "width", 1.0, 1e-12));
        }
    } catch (const std::exception& e) {
        ctx.error(path, e.what());
        return DeathRate::zero();
    }
    ctx.error(path + ".form", "unknown death form '" + form + "'");
    return DeathRate::zero();
}

InitialCondition parse_initial(const json& obj, const std::string& path, Ctx& ctx) {
    InitialCondition init;
    const std::string form = ctx.str(obj, path, "form", "point");
    if (form == "point") {
        ctx.check_keys(obj, path, {"form", "center", "count"});
        init.form = InitialCondition::Form::Point;
    } else if (form == "gaussian") {
        ctx.check_keys(obj, path, {"form", "center", "count", "width"});
        init.form = InitialCondition::Form::Gaussian;
        init.width = ctx.num(obj, path, "width", 1.0, 1e-12);
    } else if (form == "uniform_disc") {
        ctx.check_keys(obj, path, {"form", "center", "count", "radius"});
        init.form = InitialCondition::Form::UniformDisc;
        init.radius = ctx.num(obj, path, "radius", 1.0, 1e-12);
    } else if (form == "atoms") {
        ctx.check_keys(obj, path, {"form", "atoms"});
        init.form = InitialCondition::Form::Atoms;
        if (obj.contains("atoms") && obj["atoms"].is_array()) {
            for (const auto& a : obj["atoms"]) {
                if (a.is_array() && a.size() == 2 && a[0].is_number() && a[1].is_number())
                    init.atoms.push_back({a[0].get<double>(), a[1].get<double>()});
                else
                    ctx.error(path + ".atoms", "expected [x, y] entries");
            }
        } else {
            ctx.error(path, "atoms form requires an 'atoms' array");
        }
        return init;
    } else {
        ctx.error(path + ".form", "unknown initial form '" + form + "'");
    }
    init.center = ctx.vec(obj, path, "center", {0.0, 0.0});
    init.count = ctx.uint(obj, path, "count", 1);
    return init;
}

TestFunctionDictionary parse_dictionary(const json& obj, const std::string& path, Ctx& ctx) {
    if (obj.contains("functions")) {
        ctx.check_keys(obj, path, {"functions"});
        TestFunctionDictionary d;
        for (const auto& fo : obj["functions"]) {
            const std::string type = fo.value("type", "constant");
            try {
                if (type == "constant")
                    d.functions.push_back(TestFunction::constant(fo.value("value", 1.0)));
                else if (type == "gaussian")
                    d.functions.push_back(TestFunction::gaussian(
                        {fo.value("center", std::vector<double>{0.0, 0.0})[0],
                         fo.value("center", std::vector<double>{0.0, 0.0})[1]},
                        fo.value("width", 1.0)));
                else if (type == "coordinate")
                    d.functions.push_back(
                        TestFunction::coordinate(fo.value("axis", 0), fo.value("cutoff", 5.0)));
                else
                    ctx.error(path + ".functions", "unknown test function type '" + type + "'");
            } catch (const std::exception& e) {
                ctx.error(path + ".functions", e.what());
            }
        }
        if (d.functions.empty()) ctx.error(path, "dictionary has no valid functions");
        return d;
    }
    ctx.check_keys(obj, path, {"preset", "extent"});
    return TestFunctionDictionary::standard(ctx.num(obj, path, "extent", 3.0, 1e-12));
}

// normalised JSON tree with every default made explicit (hash/round-trip basis)
json normalize(const ExperimentConfig& c) {
    json j;
    const ModelSpec& m = c.run.model;
    json kernel;
    switch (m.kernel.family()) {
        case InteractionKernel::Family::Zero:
            kernel["family"] = "zero";
            break;
        case InteractionKernel::Family::ExpGaussian:
            kernel["family"] = "exp_gaussian";
            kernel["amplitude"] = m.kernel.amplitude();
            kernel["lambda"] = m.kernel.lambda();
            kernel["width"] = m.kernel.width();
            kernel["mode"] = m.kernel.attracting() ? "attract" : "repel";
            kernel["tail_epsilon"] = m.kernel.tail_epsilon();
            break;
        case InteractionKernel::Family::Table:
            kernel["family"] = "table";
            kernel["file"] = c.table_file;
            kernel["envelope_file"] = c.table_envelope_file;
            break;
    }
    auto rate_json = [](const RateFunction& r) {
        json o;
        switch (r.form) {
            case RateFunction::Form::Constant:
                o["form"] = "constant";
                o["value"] = r.base;
                break;
            case RateFunction::Form::GaussianBump:
                o["form"] = "gaussian_bump";
                o["base"] = r.base;
                o["amp"] = r.amp;
                o["center"] = {r.center.x, r.center.y};
                o["width"] = r.width;
                break;
            case RateFunction::Form::Plateau:
                o["form"] = "plateau";
                o["base"] = r.base;
                o["amp"] = r.amp;
                o["center"] = {r.center.x, r.center.y};
                o["radius"] = r.radius;
                o["width"] = r.width;
                break;
        }
        return o;
    };
    json death;
    switch (m.death.form()) {
        case DeathRate::Form::Zero:
            death["form"] = "zero";
            break;
        case DeathRate::Form::TotalMass:
            death["form"] = "total_mass";
            death["gamma"] = m.death.gamma();
            break;
        case DeathRate::Form::Convolution:
            death["form"] = "convolution";
            death["gamma"] = m.death.gamma();
            death["height"] = m.death.height();
            death["width"] = m.death.width();
            break;
    }
    json initial;
    switch (m.initial.form) {
        case InitialCondition::Form::Point:
            initial["form"] = "point";
            initial["center"] = {m.initial.center.x, m.initial.center.y};
            initial["count"] = m.initial.count;
            break;
        case InitialCondition::Form::Gaussian:
            initial["form"] = "gaussian";
            initial["center"] = {m.initial.center.x, m.initial.center.y};
            initial["count"] = m.initial.count;
            initial["width"] = m.initial.width;
            break;
        case InitialCondition::Form::UniformDisc:
            initial["form"] = "uniform_disc";
            initial["center"] = {m.initial.center.x, m.initial.center.y};
            initial["count"] = m.initial.count;
            initial["radius"] = m.initial.radius;
            break;
        case InitialCondition::Form::Atoms: {
            initial["form"] = "atoms";
            json atoms = json::array();
            for (const Vec2& a : m.initial.atoms) atoms.push_back({a.x, a.y});
            initial["atoms"] = atoms;
            break;
        }
    }
    j["model"] = {{"kernel", kernel},
                  {"b1", rate_json(m.rates.b1)},
                  {"B1", m.rates.B1},
                  {"b2", rate_json(m.rates.b2)},
                  {"B2", m.rates.B2},
                  {"death", death},
                  {"sigma", m.sigma},
                  {"scale_N", m.scale_N},
                  {"initial", initial}};
    j["run"] = {{"horizon", c.run.horizon},
                {"dt", c.run.dt},
                {"window", c.run.window},
                {"snapshot_stride", c.run.snapshot_stride},
                {"population_cap", c.run.population_cap},
                {"seed", c.run.seed},
                {"threads", c.run.threads}};
    j["meanfield"] = {{"extent", c.meanfield.grid.extent},
                      {"resolution", c.meanfield.grid.h},
                      {"dt", c.meanfield.dt},
                      {"horizon", c.meanfield.horizon},
                      {"ring_stride", c.meanfield.ring_stride},
                      {"ring_capacity", c.meanfield.ring_capacity},
                      {"snapshot_stride", c.meanfield.snapshot_stride},
                      {"pad", c.meanfield.pad},
                      {"leak_threshold", c.meanfield.leak_threshold},
                      {"kde_bandwidth", c.meanfield.kde_bandwidth}};
    j["replicas"] = {{"count", c.replica_count}};
    json dict;
    json fns = json::array();
    for (const TestFunction& f : c.dictionary.functions) {
        json fo;
        switch (f.type) {
            case TestFunction::Type::Constant:
                fo["type"] = "constant";
                fo["value"] = f.scale;
                break;
            case TestFunction::Type::Gaussian:
                fo["type"] = "gaussian";
                fo["center"] = {f.center.x, f.center.y};
                fo["width"] = f.width;
                break;
            case TestFunction::Type::Coordinate:
                fo["type"] = "coordinate";
                fo["axis"] = f.axis;
                fo["cutoff"] = f.cutoff;
                break;
        }
        fns.push_back(fo);
    }
    dict["functions"] = fns;
    j["dictionary"] = dict;
    j["output"] = {{"directory", c.output.directory},
                   {"snapshots", c.output.snapshots},
                   {"trajectories", c.output.trajectories},
                   {"events", c.output.events},
                   {"reports", c.output.reports}};
    return j;
}

}  // namespace

std::uint64_t ExperimentConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string ExperimentConfig::hash_hex() const {
    std::ostringstream ss;
    ss << std::hex << hash();
    return ss.str();
}

ParseOutcome parse_config(const std::string& text, bool strict) {
    ParseOutcome out;
    find_duplicate_keys(text, out.errors);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        out.errors.push_back(std::string("parse error: ") + e.what());
        return out;
    }
    if (!j.is_object()) {
        out.errors.push_back("top level must be an object");
        return out;
    }
    Ctx ctx{out.errors, strict};
    ctx.check_keys(j, "$",
                   {"model", "run", "meanfield", "replicas", "dictionary", "output"});

    ExperimentConfig cfg;
    const json model = j.value("model", json::object());
    ctx.check_keys(model, "model",
                   {"kernel", "b1", "B1", "b2", "B2", "death", "sigma", "scale_N", "initial"});
    ModelSpec& m = cfg.run.model;
    m.kernel = parse_kernel(model.value("kernel", json::object()), "model.kernel", ctx);
    if (model.contains("kernel") && model["kernel"].is_object()) {
        cfg.table_file = model["kernel"].value("file", "");
        cfg.table_envelope_file = model["kernel"].value("envelope_file", "");
    }
    m.rates.b1 = parse_rate(model.value("b1", json::object()), "model.b1", ctx);
    m.rates.b2 = parse_rate(model.value("b2", json::object()), "model.b2", ctx);
    m.rates.B1 = ctx.num(model, "model", "B1", m.rates.b1.sup(), 0.0);
    m.rates.B2 = ctx.num(model, "model", "B2", m.rates.b2.sup(), 0.0);
    m.death = parse_death(model.value("death", json::object()), "model.death", ctx);
    m.sigma = ctx.num(model, "model", "sigma", 0.0, 0.0);
    m.scale_N = ctx.uint(model, "model", "scale_N", 1, 1);
    m.initial = parse_initial(model.value("initial", json::object()), "model.initial", ctx);

    // a declared bound below the actual rate breaks the thinning majorant
    {
        Stream probe(12345);
        double worst1 = 0.0, worst2 = 0.0;
        for (int i = 0; i < 2000; ++i) {
            const Vec2 x{(2.0 * probe.uniform() - 1.0) * 10.0,
                         (2.0 * probe.uniform() - 1.0) * 10.0};
            worst1 = std::max(worst1, m.rates.b1(x));
            worst2 = std::max(worst2, m.rates.b2(x));
        }
        if (worst1 > m.rates.B1)
            ctx.error("model.B1", "declared bound " + std::to_string(m.rates.B1) +
                                      " is below sampled b1 max " + std::to_string(worst1) +
                                      " (assumption (b) violated)");
        if (worst2 > m.rates.B2)
            ctx.error("model.B2", "declared bound " + std::to_string(m.rates.B2) +
                                      " is below sampled b2 max " + std::to_string(worst2) +
                                      " (assumption (c) violated)");
    }

    const json run = j.value("run", json::object());
    ctx.check_keys(run, "run",
                   {"horizon", "dt", "window", "snapshot_stride", "population_cap", "seed",
                    "threads"});
    cfg.run.horizon = ctx.num(run, "run", "horizon", 1.0, 1e-12);
    cfg.run.dt = ctx.num(run, "run", "dt", 0.01, 1e-12);
    cfg.run.window = ctx.num(run, "run", "window", 0.0, 0.0);
    cfg.run.snapshot_stride = ctx.uint(run, "run", "snapshot_stride", 1, 1);
    cfg.run.population_cap = ctx.uint(run, "run", "population_cap", 1000000, 1);
    cfg.run.seed = ctx.uint(run, "run", "seed", 1);
    cfg.run.threads = static_cast<unsigned>(ctx.uint(run, "run", "threads", 1, 1));

    const json mf = j.value("meanfield", json::object());
    ctx.check_keys(mf, "meanfield",
                   {"extent", "resolution", "dt", "horizon", "ring_stride", "ring_capacity",
                    "snapshot_stride", "pad", "leak_threshold", "kde_bandwidth"});
    cfg.meanfield.model = m;
    cfg.meanfield.grid.extent = ctx.num(mf, "meanfield", "extent", 5.0, 1e-12);
    cfg.meanfield.grid.h = ctx.num(mf, "meanfield", "resolution", 0.05, 1e-12);
    cfg.meanfield.dt = ctx.num(mf, "meanfield", "dt", 1e-3, 1e-12);
    cfg.meanfield.horizon = ctx.num(mf, "meanfield", "horizon", cfg.run.horizon, 1e-12);
    cfg.meanfield.ring_stride = ctx.uint(mf, "meanfield", "ring_stride", 1, 1);
    cfg.meanfield.ring_capacity = ctx.uint(mf, "meanfield", "ring_capacity", 0);
    cfg.meanfield.snapshot_stride = ctx.uint(mf, "meanfield", "snapshot_stride", 100, 1);
    cfg.meanfield.pad = ctx.num(mf, "meanfield", "pad", -1.0);
    cfg.meanfield.leak_threshold = ctx.num(mf, "meanfield", "leak_threshold", 0.05, 0.0);
    cfg.meanfield.kde_bandwidth = ctx.num(mf, "meanfield", "kde_bandwidth", 0.0, 0.0);

    const json rep = j.value("replicas", json::object());
    ctx.check_keys(rep, "replicas", {"count", "seed_policy"});
    cfg.replica_count = ctx.uint(rep, "replicas", "count", 1, 1);
    const std::string policy = ctx.str(rep, "replicas", "seed_policy", "derived");
    if (policy != "derived")
        ctx.error("replicas.seed_policy", "only 'derived' is supported");

    cfg.dictionary = parse_dictionary(j.value("dictionary", json::object()), "dictionary", ctx);

    const json outp = j.value("output", json::object());
    ctx.check_keys(outp, "output",
                   {"directory", "snapshots", "trajectories", "events", "reports"});
    cfg.output.directory = ctx.str(outp, "output", "directory", "out");
    cfg.output.snapshots = ctx.flag(outp, "output", "snapshots", true);
    cfg.output.trajectories = ctx.flag(outp, "output", "trajectories", false);
    cfg.output.events = ctx.flag(outp, "output", "events", false);
    cfg.output.reports = ctx.flag(outp, "output", "reports", true);

    // structural validation of the assembled plans
    try {
        cfg.run.validate();
    } catch (const std::exception& e) {
        ctx.error("run", e.what());
    }
    try {
        cfg.meanfield.validate();
    } catch (const std::exception& e) {
        ctx.error("meanfield", e.what());
    }

    if (!out.errors.empty()) return out;
    cfg.canonical = normalize(cfg).dump();
    out.config = std::move(cfg);
    out.ok = true;
    return out;
}

ParseOutcome load_config(const std::string& path, bool strict) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const std::exception& e) {
        ParseOutcome out;
        out.errors.push_back(e.what());
        return out;
    }
    return parse_config(text, strict);
}

std::string serialize_config(const ExperimentConfig& config) { return config.canonical; }

}  // namespace myco
