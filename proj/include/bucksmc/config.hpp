#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bucksmc/converter.hpp"
#include "bucksmc/priors.hpp"
#include "bucksmc/smc.hpp"

namespace bucksmc {

/// Scenario settings: the transient load step and the steady-state window.
struct ScenarioConfig {
    std::optional<LoadStep> load_step;
    double steady_state_fraction = 0.2;
};

struct IoConfig {
    bool synthetic = false;          // generate measurements from the converter
    std::string measurements_path;   // or read them from this CSV
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    double noise_sigma = 0.0;        // optional additive measurement noise
};

/// Standalone prior-correction job (correct-prior subcommand).
struct CorrectionJob {
    std::string target;
    double low = 0.0;
    double high = 1e4;
    std::size_t n_probe = 200;
    std::size_t n_keep = 20;
};

/// A parameter whose prior was declared broad/unknown; calibration replaces
/// it with a fitted Gaussian before sampling.
struct BroadPrior {
    std::string name;
    double low = 0.0;
    double high = 1e4;
    std::size_t n_probe = 200;
    std::size_t n_keep = 20;
};

struct ExperimentConfig {
    ConverterSpec converter; // load_step not set here; scenario owns it
    std::vector<std::string> parameters;
    PriorSet priors;
    std::vector<BroadPrior> broad_priors;
    EngineConfig engine;
    ScenarioConfig scenario;
    IoConfig io;
    std::optional<CorrectionJob> correction;

    /// Converter with the scenario's load step applied.
    ConverterSpec scenario_converter() const;

    void validate() const;

    /// Canonical TOML text with every default filled in.
    std::string to_toml() const;
};

/// Parses and validates a config file; unknown keys, missing values and
/// invariant violations raise ConfigError naming the key and line.
ExperimentConfig load_config(const std::string& path);

/// Same, from in-memory text (tests).
ExperimentConfig load_config_text(const std::string& text);

} // namespace bucksmc
