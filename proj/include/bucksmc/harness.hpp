#pragma once

#include <string>
#include <vector>

#include "bucksmc/config.hpp"
#include "bucksmc/sensitivity.hpp"
#include "bucksmc/smc.hpp"

namespace bucksmc {

struct GenerationSummary {
    int t = 0;
    double epsilon = 0.0;
    double acc = 0.0;
    std::size_t n_sims = 0;
};

struct ParameterReport {
    std::string name;
    std::string unit;
    std::string prior;          // human-readable prior description
    double true_value = 0.0;    // valid only when has_truth
    bool has_truth = false;
    double posterior_mean = 0.0;
    double posterior_sd = 0.0;
    double pct_error = 0.0;     // 100 |est - true| / true, valid only when has_truth
};

struct CalibrationReport {
    std::vector<ParameterReport> parameters;
    std::vector<GenerationSummary> generations;
    std::size_t pilot_sims = 0;
    std::size_t total_sims = 0;
    double wall_time_s = 0.0;
    bool truncated = false;
    std::uint64_t seed = 0;
    std::string weight_scheme;
};

/// Creates the output directory and writes the effective (defaults-filled)
/// config there for provenance.
void prepare_out_dir(const ExperimentConfig& cfg);

struct SyntheticResult {
    Waveform measurements;
    ParameterVector truth;
};

/// Simulates the configured converter, optionally adds Gaussian measurement
/// noise, and writes measurements.csv plus truth.json to the output dir.
SyntheticResult generate_synthetic(const ExperimentConfig& cfg);

/// Full calibration pipeline: measurements (synthetic or file), prior
/// correction for broad priors, the SMC run, and all report artifacts
/// (report.json, population_*.json, transient.csv, steady_state.csv).
CalibrationReport run_calibration(const ExperimentConfig& cfg);

/// Paired proposed/baseline runs; writes comparison.csv. runs must be >= 2.
std::vector<WeightComparisonRun> run_weight_comparison(const ExperimentConfig& cfg, int runs);

/// Sensitivity ranking over the configured parameters; writes sensitivity.csv.
SensitivityReport run_sensitivity(const ExperimentConfig& cfg);

/// Standalone prior correction for cfg.correction; writes fitted_prior.json.
PriorCorrectionResult run_prior_correction(const ExperimentConfig& cfg);

} // namespace bucksmc
