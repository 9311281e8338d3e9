#include "bucksmc/harness.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "bucksmc/csv.hpp"
#include "bucksmc/stats.hpp"

namespace bucksmc {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kFormatVersion = 1;

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    return (fs::path(cfg.io.out_dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SpecError("cannot write '" + path + "'");
    out << text;
}

void write_json(const std::string& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

std::string prior_description(const Prior& p) {
    std::ostringstream o;
    if (p.kind() == Prior::Kind::Uniform)
        o << "uniform(" << p.low() << ", " << p.high() << ")";
    else
        o << "gaussian(" << p.gaussian_mean() << ", " << p.gaussian_variance() << ")";
    return o.str();
}

json params_json(const ParameterVector& pv) {
    json arr = json::array();
    for (const auto& e : pv)
        arr.push_back({{"name", e.name}, {"value", e.value}, {"unit", e.unit}});
    return arr;
}

json converter_json(const ConverterSpec& s) {
    json j;
    for (const auto& f : converter_fields()) j[f.name] = s.*(f.member);
    j["t_end"] = s.t_end;
    j["sample_rate"] = s.sample_rate;
    j["steps_per_period"] = s.steps_per_period;
    if (s.load_step) {
        j["load_step"] = {{"time", s.load_step->time}, {"R_load", s.load_step->R_load}};
    }
    return j;
}

void write_population_json(const ExperimentConfig& cfg, const Population& pop) {
    json j;
    j["format_version"] = kFormatVersion;
    j["iteration"] = pop.t;
    j["epsilon_used"] = pop.epsilon_used;
    json parts = json::array();
    for (const Particle& p : pop.particles) {
        json e;
        e["params"] = json::object();
        for (const auto& entry : p.params) e["params"][entry.name] = entry.value;
        e["rho"] = p.rho;
        e["weight"] = p.weight;
        parts.push_back(std::move(e));
    }
    j["particles"] = std::move(parts);
    json cov = json::array();
    for (Eigen::Index r = 0; r < pop.kernel_cov.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < pop.kernel_cov.cols(); ++c) row.push_back(pop.kernel_cov(r, c));
        cov.push_back(std::move(row));
    }
    j["kernel_cov"] = std::move(cov);
    j["diagnostics"] = {{"n_sims", pop.diagnostics.n_sims},
                        {"acc", pop.diagnostics.acc},
                        {"seed", pop.diagnostics.seed},
                        {"truncated", pop.diagnostics.truncated},
                        {"rho_clamped", pop.diagnostics.rho_clamped},
                        {"kernel_regularized", pop.diagnostics.kernel_regularized}};
    char name[64];
    std::snprintf(name, sizeof name, "population_%02d.json", pop.t);
    write_json(out_path(cfg, name), j);
}

Waveform add_noise(const Waveform& w, double sigma, std::uint64_t seed) {
    if (sigma <= 0.0) return w;
    Waveform out = w;
    Rng rng(derive_seed(seed, 0x6e6f6973ULL, 0));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.V_out[i] += sigma * rng.normal();
        out.I_out[i] += sigma * rng.normal();
    }
    return out;
}

// Writes t,v_meas,i_meas,v_prior,i_prior,v_post,i_post rows; absent
// simulations (diverged) are written as nan.
void write_overlay_csv(const std::string& path, const Waveform& meas, const Waveform* prior,
                       const Waveform* post) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SpecError("cannot write '" + path + "'");
    out << "t,v_meas,i_meas,v_prior,i_prior,v_post,i_post\n";
    char buf[256];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < meas.size(); ++i) {
        const double vp = prior ? prior->V_out[i] : nan;
        const double ip = prior ? prior->I_out[i] : nan;
        const double vq = post ? post->V_out[i] : nan;
        const double iq = post ? post->I_out[i] : nan;
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", meas.t[i],
                      meas.V_out[i], meas.I_out[i], vp, ip, vq, iq);
        out << buf;
    }
}

} // namespace

void prepare_out_dir(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.io.out_dir);
    write_text(out_path(cfg, "effective_config.toml"), cfg.to_toml());
}

SyntheticResult generate_synthetic(const ExperimentConfig& cfg) {
    prepare_out_dir(cfg);
    const ConverterSpec model = cfg.scenario_converter();
    SyntheticResult res;
    res.measurements = add_noise(simulate(model), cfg.io.noise_sigma, cfg.io.seed);
    if (res.measurements.empty()) throw SpecError("synthetic scenario produced no samples");
    res.truth = ParameterVector::from_spec(model, cfg.parameters);
    write_waveform_csv(out_path(cfg, "measurements.csv"), res.measurements);
    json truth;
    truth["format_version"] = kFormatVersion;
    truth["parameters"] = params_json(res.truth);
    truth["converter"] = converter_json(model);
    truth["noise_sigma"] = cfg.io.noise_sigma;
    truth["seed"] = cfg.io.seed;
    write_json(out_path(cfg, "truth.json"), truth);
    return res;
}

CalibrationReport run_calibration(const ExperimentConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    prepare_out_dir(cfg);
    const ConverterSpec model = cfg.scenario_converter();

    Waveform measurements;
    ParameterVector truth;
    bool has_truth = false;
    if (cfg.io.synthetic) {
        SyntheticResult s = generate_synthetic(cfg);
        measurements = std::move(s.measurements);
        truth = std::move(s.truth);
        has_truth = true;
    } else {
        measurements = read_waveform_csv(cfg.io.measurements_path);
    }

    // Replace broad priors by fitted Gaussians before sampling starts.
    PriorSet priors = cfg.priors;
    if (!cfg.broad_priors.empty()) {
        json fitted = json::array();
        for (std::size_t bi = 0; bi < cfg.broad_priors.size(); ++bi) {
            const BroadPrior& b = cfg.broad_priors[bi];
            PriorCorrectionConfig pc;
            pc.N0 = b.n_probe;
            pc.Np = b.n_keep;
            pc.broad_low = b.low;
            pc.broad_high = b.high;
            pc.target_parameter = b.name;
            pc.seed = derive_seed(cfg.io.seed, 0x636f7272ULL, bi);
            pc.workers = cfg.engine.workers;
            pc.scenario = model;
            ParameterVector others;
            for (std::size_t i = 0; i < priors.size(); ++i) {
                if (priors.name(i) == b.name) continue;
                others.push_back(priors.name(i), priors.prior(i).mean());
            }
            const PriorCorrectionResult r = correct_prior(pc, others, measurements);
            const double var_floor = 1e-12 * r.mean * r.mean + 1e-300;
            const int idx = priors.index_of(b.name);
            priors.replace(static_cast<std::size_t>(idx),
                           Prior::gaussian(r.mean, std::max(r.variance, var_floor)));
            fitted.push_back({{"parameter", b.name},
                              {"mean", r.mean},
                              {"variance", r.variance},
                              {"n_probe", b.n_probe},
                              {"n_keep", b.n_keep},
                              {"n_divergent", r.n_divergent}});
        }
        json j;
        j["format_version"] = kFormatVersion;
        j["fitted_priors"] = std::move(fitted);
        write_json(out_path(cfg, "fitted_priors.json"), j);
    }

    const SmcResult res = smc_run(cfg.engine, priors, measurements, model);

    CalibrationReport rep;
    rep.seed = cfg.engine.seed;
    rep.truncated = res.truncated;
    rep.pilot_sims = res.pilot_sims;
    rep.total_sims = res.total_sims();
    rep.weight_scheme =
        cfg.engine.weight_scheme == WeightScheme::Proposed ? "proposed" : "baseline";

    const Population& fin = res.final_population();
    Eigen::VectorXd post_mean, post_sd;
    if (!fin.particles.empty()) {
        post_mean = fin.weighted_mean();
        post_sd = fin.weighted_std();
    } else {
        post_mean = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(priors.size()),
                                              std::numeric_limits<double>::quiet_NaN());
        post_sd = post_mean;
    }
    for (std::size_t i = 0; i < priors.size(); ++i) {
        ParameterReport pr;
        pr.name = priors.name(i);
        pr.unit = field_info(pr.name).unit;
        pr.prior = prior_description(priors.prior(i));
        pr.posterior_mean = post_mean[static_cast<Eigen::Index>(i)];
        pr.posterior_sd = post_sd[static_cast<Eigen::Index>(i)];
        if (has_truth) {
            pr.has_truth = true;
            pr.true_value = truth[i].value;
            pr.pct_error = 100.0 * std::abs(pr.posterior_mean - pr.true_value) /
                           std::abs(pr.true_value);
        }
        rep.parameters.push_back(std::move(pr));
    }
    for (const Population& p : res.populations) {
        rep.generations.push_back({p.t, p.epsilon_used, p.diagnostics.acc, p.diagnostics.n_sims});
        write_population_json(cfg, p);
    }
    rep.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    json j;
    j["format_version"] = kFormatVersion;
    j["seed"] = rep.seed;
    j["weight_scheme"] = rep.weight_scheme;
    j["truncated"] = rep.truncated;
    j["pilot_sims"] = rep.pilot_sims;
    j["total_sims"] = rep.total_sims;
    json params = json::array();
    for (const auto& p : rep.parameters) {
        json e;
        e["name"] = p.name;
        e["unit"] = p.unit;
        e["prior"] = p.prior;
        if (p.has_truth) e["true_value"] = p.true_value;
        e["posterior_mean"] = p.posterior_mean;
        e["posterior_sd"] = p.posterior_sd;
        if (p.has_truth) e["pct_error"] = p.pct_error;
        params.push_back(std::move(e));
    }
    j["parameters"] = std::move(params);
    json gens = json::array();
    for (const auto& g : rep.generations)
        gens.push_back({{"t", g.t}, {"epsilon", g.epsilon}, {"acc", g.acc}, {"n_sims", g.n_sims}});
    j["generations"] = std::move(gens);
    j["timing"] = {{"total_wall_time_s", rep.wall_time_s}};
    write_json(out_path(cfg, "report.json"), j);

    // Before/after overlays for the transient record and the trailing window.
    Waveform prior_sim, post_sim;
    bool have_prior = false, have_post = false;
    try {
        prior_sim = simulate(model, priors.to_parameter_vector(priors.means()));
        have_prior = true;
    } catch (const DivergenceError&) {
    }
    if (!fin.particles.empty()) {
        try {
            post_sim = simulate(model, priors.to_parameter_vector(post_mean));
            have_post = true;
        } catch (const DivergenceError&) {
        }
    }
    write_overlay_csv(out_path(cfg, "transient.csv"), measurements,
                      have_prior ? &prior_sim : nullptr, have_post ? &post_sim : nullptr);
    const double frac = cfg.scenario.steady_state_fraction;
    Waveform meas_ss = steady_state_window(measurements, frac);
    Waveform prior_ss, post_ss;
    if (have_prior) prior_ss = steady_state_window(prior_sim, frac);
    if (have_post) post_ss = steady_state_window(post_sim, frac);
    write_overlay_csv(out_path(cfg, "steady_state.csv"), meas_ss,
                      have_prior ? &prior_ss : nullptr, have_post ? &post_ss : nullptr);
    return rep;
}

std::vector<WeightComparisonRun> run_weight_comparison(const ExperimentConfig& cfg, int runs) {
    if (runs < 2) throw SpecError("weight comparison requires at least 2 runs");
    prepare_out_dir(cfg);
    const ConverterSpec model = cfg.scenario_converter();
    Waveform measurements;
    if (cfg.io.synthetic) {
        measurements = generate_synthetic(cfg).measurements;
    } else {
        measurements = read_waveform_csv(cfg.io.measurements_path);
    }
    const auto rows = compare_weight_schemes(cfg.engine, cfg.priors, measurements, model, runs);

    std::ofstream out(out_path(cfg, "comparison.csv"), std::ios::binary);
    if (!out) throw SpecError("cannot write comparison.csv");
    out << "run,seed,acc2_proposed,acc2_baseline,acc_aggregate_proposed,"
           "acc_aggregate_baseline,sims_proposed,sims_baseline,"
           "truncated_proposed,truncated_baseline\n";
    char buf[256];
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        std::snprintf(buf, sizeof buf, "%zu,%llu,%.17g,%.17g,%.17g,%.17g,%zu,%zu,%d,%d\n", i,
                      static_cast<unsigned long long>(r.seed), r.proposed.acc_iter2,
                      r.baseline.acc_iter2, r.proposed.acc_aggregate, r.baseline.acc_aggregate,
                      r.proposed.total_sims, r.baseline.total_sims,
                      r.proposed.truncated ? 1 : 0, r.baseline.truncated ? 1 : 0);
        out << buf;
    }
    return rows;
}

SensitivityReport run_sensitivity(const ExperimentConfig& cfg) {
    prepare_out_dir(cfg);
    SensitivityConfig sc;
    sc.parameter_names = cfg.parameters;
    sc.scenario = cfg.scenario_converter();
    sc.workers = cfg.engine.workers;
    const SensitivityReport rep = rank_parameters(sc);
    std::ofstream out(out_path(cfg, "sensitivity.csv"), std::ios::binary);
    if (!out) throw SpecError("cannot write sensitivity.csv");
    out << "name,raw,normalized\n";
    char buf[128];
    for (const auto& e : rep.entries) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g\n", e.name.c_str(), e.raw, e.normalized);
        out << buf;
    }
    return rep;
}

PriorCorrectionResult run_prior_correction(const ExperimentConfig& cfg) {
    if (!cfg.correction)
        throw ConfigError("correct-prior needs a [prior_correction] section in the config");
    prepare_out_dir(cfg);
    const ConverterSpec model = cfg.scenario_converter();
    Waveform measurements;
    if (cfg.io.synthetic) {
        measurements = generate_synthetic(cfg).measurements;
    } else {
        measurements = read_waveform_csv(cfg.io.measurements_path);
    }
    const CorrectionJob& job = *cfg.correction;
    PriorCorrectionConfig pc;
    pc.N0 = job.n_probe;
    pc.Np = job.n_keep;
    pc.broad_low = job.low;
    pc.broad_high = job.high;
    pc.target_parameter = job.target;
    pc.seed = cfg.io.seed;
    pc.workers = cfg.engine.workers;
    pc.scenario = model;
    ParameterVector others;
    for (std::size_t i = 0; i < cfg.priors.size(); ++i) {
        if (cfg.priors.name(i) == job.target) continue;
        others.push_back(cfg.priors.name(i), cfg.priors.prior(i).mean());
    }
    const PriorCorrectionResult res = correct_prior(pc, others, measurements);
    json j;
    j["format_version"] = kFormatVersion;
    j["parameter"] = job.target;
    j["kind"] = "gaussian";
    j["mean"] = res.mean;
    j["variance"] = res.variance;
    j["n_probe"] = job.n_probe;
    j["n_keep"] = job.n_keep;
    j["n_divergent"] = res.n_divergent;
    j["broad_low"] = job.low;
    j["broad_high"] = job.high;
    write_json(out_path(cfg, "fitted_prior.json"), j);
    return res;
}

} // namespace bucksmc
