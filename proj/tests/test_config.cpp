#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "myco/config.hpp"

using namespace myco;

TEST_CASE("minimal config parses with defaults and a stable hash") {
    const ParseOutcome a = parse_config("{}");
    REQUIRE(a.ok);
    CHECK(a.config.run.model.kernel.is_zero());
    CHECK(a.config.run.dt == 0.01);
    CHECK(a.config.replica_count == 1);
    const ParseOutcome b = parse_config("{}");
    CHECK(a.config.hash() == b.config.hash());
    CHECK(!a.config.hash_hex().empty());
}

TEST_CASE("hash is stable under key reordering") {
    const char* t1 = R"({"run": {"dt": 0.02, "horizon": 2.0}, "model": {"sigma": 0.5}})";
    const char* t2 = R"({"model": {"sigma": 0.5}, "run": {"horizon": 2.0, "dt": 0.02}})";
    const ParseOutcome a = parse_config(t1);
    const ParseOutcome b = parse_config(t2);
    REQUIRE(a.ok);
    REQUIRE(b.ok);
    CHECK(a.config.hash() == b.config.hash());
}

TEST_CASE("round trip: parse(serialize(config)) has the same canonical form") {
    const char* text = R"({
        "model": {
            "kernel": {"family": "exp_gaussian", "amplitude": 1.5, "lambda": 0.7,
                        "width": 0.9, "mode": "repel"},
            "b1": {"form": "constant", "value": 0.8},
            "b2": {"form": "gaussian_bump", "base": 0.1, "amp": 0.4,
                    "center": [1.0, -1.0], "width": 0.6},
            "death": {"form": "total_mass", "gamma": 0.2},
            "sigma": 0.3,
            "scale_N": 4,
            "initial": {"form": "gaussian", "center": [0.0, 0.0], "width": 0.5, "count": 40}
        },
        "run": {"horizon": 1.5, "dt": 0.05, "seed": 9},
        "replicas": {"count": 3}
    })";
    const ParseOutcome a = parse_config(text);
    REQUIRE(a.ok);
    const ParseOutcome b = parse_config(serialize_config(a.config));
    REQUIRE(b.ok);
    CHECK(serialize_config(a.config) == serialize_config(b.config));
    CHECK(a.config.hash() == b.config.hash());
}

TEST_CASE("duplicate keys are rejected with the key named") {
    const ParseOutcome out = parse_config(R"({"run": {"dt": 0.1, "dt": 0.2}})");
    CHECK(!out.ok);
    bool found = false;
    for (const auto& e : out.errors)
        if (e.find("duplicate key: dt") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("strict mode rejects unknown keys; lax mode accepts them") {
    const char* text = R"({"run": {"dt": 0.1, "dtt": 0.2}})";
    const ParseOutcome strict = parse_config(text, true);
    CHECK(!strict.ok);
    bool found = false;
    for (const auto& e : strict.errors)
        if (e.find("unknown key 'dtt'") != std::string::npos) found = true;
    CHECK(found);
    const ParseOutcome lax = parse_config(text, false);
    CHECK(lax.ok);
}

TEST_CASE("understated branching bound is a validation error naming the assumption") {
    const char* text = R"({"model": {"b1": {"form": "constant", "value": 1.0}, "B1": 0.5}})";
    const ParseOutcome out = parse_config(text);
    CHECK(!out.ok);
    bool found = false;
    for (const auto& e : out.errors)
        if (e.find("model.B1") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("all validation errors are collected, not just the first") {
    const char* text = R"({
        "model": {"b1": {"form": "constant", "value": 1.0}, "B1": 0.5, "sigma": -1.0},
        "run": {"dt": -0.1}
    })";
    const ParseOutcome out = parse_config(text);
    CHECK(!out.ok);
    CHECK(out.errors.size() >= 3);
}

TEST_CASE("window must be a multiple of dt") {
    const ParseOutcome out = parse_config(R"({"run": {"dt": 0.1, "window": 0.25}})");
    CHECK(!out.ok);
}

TEST_CASE("defaulted bounds pick the analytic sup of the rate presets") {
    const char* text = R"({"model": {"b1": {"form": "gaussian_bump", "base": 0.2,
        "amp": 0.7, "center": [0, 0], "width": 1.0}}})";
    const ParseOutcome out = parse_config(text);
    REQUIRE(out.ok);
    CHECK(out.config.run.model.rates.B1 == doctest::Approx(0.9));
}

TEST_CASE("atoms initial condition round trips") {
    const char* text = R"({"model": {"initial": {"form": "atoms",
        "atoms": [[0.0, 0.0], [1.0, 2.0]]}}})";
    const ParseOutcome out = parse_config(text);
    REQUIRE(out.ok);
    REQUIRE(out.config.run.model.initial.atoms.size() == 2);
    CHECK(out.config.run.model.initial.atoms[1] == Vec2{1.0, 2.0});
    const ParseOutcome again = parse_config(serialize_config(out.config));
    REQUIRE(again.ok);
    CHECK(again.config.hash() == out.config.hash());
}
