#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "rsmpc/benchmarks.hpp"

namespace rsmpc {
namespace harness {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class RunError : public std::runtime_error {
public:
    explicit RunError(const std::string& what) : std::runtime_error(what) {}
};

enum class EstimatorSelection { Ekf, RsEkf, Both };

/// Validated experiment description. Presets fill every field the file
/// leaves out; unknown keys are rejected.
struct ExperimentConfig {
    std::string preset;  // quadrotor-load | arm-push | centroidal-prior
    EstimatorSelection estimator = EstimatorSelection::Both;
    double mu = -1.0;  // -1: use the preset default
    int trials = 1;
    int steps = -1;  // -1: preset default
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string out_dir;
    double prior_offset = 20.0;  // centroidal-prior only [N]
    double push_norm = -1.0;     // arm-push only; -1: preset default

    double resolved_mu() const;
};

/// Parse + validate a JSON config file. CLI-style overrides (e.g. from
/// flags) are applied after the file, before validation.
ExperimentConfig load_config(const std::string& path,
                             const std::map<std::string, std::string>& overrides = {});

/// Validate a config assembled in memory (same rules as load_config).
void validate_config(ExperimentConfig& cfg);

struct TrialRecord {
    int trial = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string failure_reason;
    double mse_ekf = 0.0, cost_ekf = 0.0;
    double mse_rs = 0.0, cost_rs = 0.0;
};

struct StudySummary {
    ExperimentConfig config;
    std::vector<TrialRecord> trials;
    int failed_trials = 0;
    double mse_ekf = 0.0, mse_rsekf = 0.0;
    double cost_ekf = 0.0, cost_rsekf = 0.0;
    double mse_improvement_pct = 0.0;
    double cost_improvement_pct = 0.0;
};

/// Runs all (estimator x trial) combinations (trial i uses seed + i),
/// writes per-trial CSV, summary.json and meta.json under cfg.out_dir.
StudySummary run_study(const ExperimentConfig& cfg);

/// Serialize / recompute helpers (exposed for tests).
std::string summary_to_json(const StudySummary& s);
void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryLog& log);

/// Aligned comparison table of summary JSON files on stdout. Throws
/// ConfigError on schema mismatch, naming the missing field.
void compare(const std::vector<std::string>& files, std::ostream& os);

/// Default output directory: $RSMPC_OUT if set, else "./out".
std::string default_out_dir();

}  // namespace harness
}  // namespace rsmpc
