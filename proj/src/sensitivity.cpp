#include "bucksmc/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "bucksmc/parallel.hpp"

namespace bucksmc {

void SensitivityConfig::validate() const {
    if (!(relative_perturbation > 0.0) || !(relative_perturbation < 1.0))
        throw SpecError("sensitivity: relative_perturbation must lie in (0, 1)");
    if (parameter_names.empty())
        throw SpecError("sensitivity: at least one parameter name required");
    for (const auto& n : parameter_names) field_info(n);
    scenario.validate();
}

double sensitivity_from_waveforms(const Waveform& plus, const Waveform& minus,
                                  double delta, double v_scale, double i_scale) {
    const std::size_t k = plus.size();
    if (k == 0 || minus.size() != k)
        throw GridMismatchError("sensitivity: perturbed trajectories differ in length");
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        acc += v_scale * std::abs(plus.V_out[i] - minus.V_out[i]) +
               i_scale * std::abs(plus.I_out[i] - minus.I_out[i]);
    return acc / (static_cast<double>(k) * 2.0 * delta);
}

double trajectory_sensitivity(const SensitivityConfig& cfg, const std::string& name) {
    const double alpha = get_field(cfg.scenario, name);
    if (alpha == 0.0)
        throw SpecError("sensitivity: parameter '" + name +
                        "' is zero; relative perturbation undefined");
    const double d = cfg.relative_perturbation;
    ConverterSpec up = cfg.scenario, down = cfg.scenario;
    set_field(up, name, alpha * (1.0 + d));
    set_field(down, name, alpha * (1.0 - d));
    up.validate();
    down.validate();
    Waveform wu, wd;
    parallel_for(2, cfg.workers, [&](std::size_t i) {
        if (i == 0)
            wu = simulate(up);
        else
            wd = simulate(down);
    });
    return sensitivity_from_waveforms(wu, wd, d, cfg.v_scale, cfg.i_scale);
}

void sort_report_entries(std::vector<SensitivityReport::Entry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.normalized != b.normalized) return a.normalized > b.normalized;
        return a.name < b.name;
    });
}

SensitivityReport rank_parameters(const SensitivityConfig& cfg) {
    cfg.validate();
    SensitivityReport rep;
    rep.entries.resize(cfg.parameter_names.size());
    parallel_for(cfg.parameter_names.size(), cfg.workers, [&](std::size_t i) {
        SensitivityConfig inner = cfg;
        inner.workers = 1; // the outer scan already spreads across workers
        rep.entries[i].name = cfg.parameter_names[i];
        rep.entries[i].raw = trajectory_sensitivity(inner, cfg.parameter_names[i]);
    });
    rep.K_used = static_cast<std::size_t>(
                     std::floor(cfg.scenario.t_end * cfg.scenario.sample_rate + 1e-9)) +
                 1;
    double max_raw = 0.0;
    for (const auto& e : rep.entries) max_raw = std::max(max_raw, e.raw);
    if (max_raw > 0.0) {
        for (auto& e : rep.entries) e.normalized = e.raw / max_raw;
    } else {
        rep.zero_normalization = true;
    }
    sort_report_entries(rep.entries);
    return rep;
}

} // namespace bucksmc
