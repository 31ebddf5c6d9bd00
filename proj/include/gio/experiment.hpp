#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gio/agent.hpp"
#include "gio/envs.hpp"
#include "gio/solver.hpp"

namespace gio {

inline constexpr const char* kArtifactVersion = "gio-0.1.0";

/// Experiment description: environment, algorithm, per-algorithm settings,
/// seed list. Parsed from JSON with unknown keys rejected.
struct ExperimentConfig {
    envs::EnvSpec env;      // used when env_file is empty
    std::string env_file;   // path to an MDP JSON file
    std::string algorithm = "gio-exact";  // gio-exact | gio-agent | soft-pi | standard-pi
    SolverConfig solver;
    AgentConfig agent;
    long agent_steps = 200000;
    std::vector<std::uint64_t> seeds{1};
    std::string out_dir = "out";
    bool emit_svg = false;
};

ExperimentConfig config_from_json(const std::string& text);
/// Canonical (sorted-key) dump used for hashing; stable under key reordering
/// in the source file.
std::string config_canonical_json(const ExperimentConfig& config);

struct SeedRun {
    std::uint64_t seed = 0;
    bool converged = true;
    std::string csv;                        // per-seed trace, also written to disk
    std::map<std::string, double> finals;   // final metric values
    std::vector<double> curve;              // objective/return series for charts
};

struct RunRecord {
    std::string config_hash;
    std::string version = kArtifactVersion;
    std::string algorithm;
    std::vector<SeedRun> runs;
    // metric -> {mean, std, min, max} over seeds (final values)
    std::map<std::string, std::array<double, 4>> summary;
    bool all_converged = true;
};

std::string summary_to_json(const RunRecord& record);

/// Executes every seed (parallel workers, capped by GIO_THREADS), writes
/// per-seed CSVs plus summary.json under out_dir, and returns the record.
RunRecord run_experiment(const ExperimentConfig& config);

/// Strictly positive per-seed initial policy: Dirichlet mixed with uniform.
PolicyTable seeded_initial_policy(int n_states, int n_actions, std::uint64_t seed);

/// Resolve the configured environment (file or named generator).
TabularMdp resolve_env(const ExperimentConfig& config);

/// Worker cap: GIO_THREADS if set, else hardware concurrency.
int worker_count(std::size_t jobs);

}  // namespace gio
