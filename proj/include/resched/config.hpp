#pragma once

#include <string>
#include <vector>

#include "resched/channel_sim.hpp"
#include "resched/learning.hpp"
#include "resched/process_model.hpp"

namespace resched {

enum class ProblemKind { costly, constrained };

struct AlgorithmSpec {
    std::string label;  // section token; also selects the algorithm
    LearnerOptions options;
};

// Fully resolved experiment description. Defaults describe the benchmark
// plant (2x2 unstable pair) on a constant 0.7 channel with a per-use price.
struct ExperimentConfig {
    LtiSystem system;
    ChannelSchedule channel;
    ProblemKind kind = ProblemKind::costly;
    double lambda = 20.0;  // transmission price (costly formulation)
    double b = 0.0;        // average budget (constrained formulation)
    int M = 30;
    double solver_tol = 1e-10;
    std::vector<AlgorithmSpec> algorithms;
    long T = 20000;
    std::vector<long> seeds;  // one simulation run per seed
    int window = 1000;
    std::string out_dir = "out";

    void validate() const;  // throws ConfigError
};

ExperimentConfig default_config();

// Flat INI-style text:  [section] lines introduce system / channel / problem /
// run / "algorithm <token>" blocks; each block holds key = value pairs.
// '#' starts a comment. Throws ConfigError naming the offending field.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Built-in experiment presets: costly20, constrained04, timevarying, mdpx.
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

// Deterministic serialization of every resolved field, and its FNV-1a-64
// digest (16 hex chars) used to stamp output files.
std::string canonical_text(const ExperimentConfig& cfg);
std::string config_digest(const ExperimentConfig& cfg);

}  // namespace resched
