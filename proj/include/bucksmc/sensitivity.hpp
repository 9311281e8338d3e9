#pragma once

#include <string>
#include <vector>

#include "bucksmc/converter.hpp"
#include "bucksmc/parameters.hpp"

namespace bucksmc {

/// Settings for the central-difference trajectory sensitivity scan.
struct SensitivityConfig {
    double relative_perturbation = 0.05; // delta: alpha_i shifts by +-delta*alpha_i
    std::vector<std::string> parameter_names;
    ConverterSpec scenario;
    // optional per-channel scales applied to the two output channels before
    // summing; (1, 1) reproduces the plain mixed-unit sum
    double v_scale = 1.0;
    double i_scale = 1.0;
    unsigned workers = 0;

    void validate() const;
};

struct SensitivityReport {
    struct Entry {
        std::string name;
        double raw = 0.0;        // per-sample mean absolute output shift per unit
                                 // relative parameter change
        double normalized = 0.0; // raw / max raw, in [0, 1]
    };
    std::vector<Entry> entries; // descending by normalized, ties by name
    std::size_t K_used = 0;
    bool zero_normalization = false; // every raw sensitivity was zero
};

/// Formula core: sum_k (|dV_k| + |dI_k|) / (K * 2 * delta) for trajectories
/// at alpha*(1 + delta) and alpha*(1 - delta).
double sensitivity_from_waveforms(const Waveform& plus, const Waveform& minus,
                                  double delta, double v_scale = 1.0,
                                  double i_scale = 1.0);

/// Runs the two perturbed simulations for one named parameter.
double trajectory_sensitivity(const SensitivityConfig& cfg, const std::string& name);

/// Sensitivities for every configured parameter, normalized by the maximum
/// and sorted descending (lexicographic tie-break).
SensitivityReport rank_parameters(const SensitivityConfig& cfg);

/// Ordering used by rank_parameters, exposed for direct testing.
void sort_report_entries(std::vector<SensitivityReport::Entry>& entries);

} // namespace bucksmc
