#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "myco/analysis.hpp"
#include "myco/engine.hpp"
#include "myco/meanfield.hpp"

namespace myco {

struct OutputOptions {
    std::string directory = "out";
    bool snapshots = true;
    bool trajectories = false;
    bool events = false;
    bool reports = true;
};

// The complete experiment: one ModelSpec shared by the particle engine and the
// mean-field solver, plus run plans, the replica plan and the dictionary.
struct ExperimentConfig {
    RunConfig run;              // includes the ModelSpec
    MeanFieldConfig meanfield;  // carries the same ModelSpec
    std::size_t replica_count = 1;
    TestFunctionDictionary dictionary;
    OutputOptions output;
    std::string table_file;           // tabulated kernel sources, kept for round-trips
    std::string table_envelope_file;
    std::string canonical;      // normalised JSON (defaults filled, keys sorted)

    std::uint64_t hash() const;
    std::string hash_hex() const;
};

struct ParseOutcome {
    bool ok = false;
    ExperimentConfig config;
    std::vector<std::string> errors;  // every validation problem, not just the first
};

// Parse + validate the documented JSON config format. In strict mode unknown
// keys are errors; duplicate keys are always errors.
ParseOutcome parse_config(const std::string& text, bool strict = true);
ParseOutcome load_config(const std::string& path, bool strict = true);

std::string serialize_config(const ExperimentConfig& config);

constexpr const char* kToolVersion = "myco 0.1.0";

}  // namespace myco
