#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bucksmc/converter.hpp"
#include "bucksmc/parameters.hpp"
#include "bucksmc/rng.hpp"

namespace bucksmc {

/// Per-parameter prior distribution. Gaussian priors describe nonnegative
/// physical quantities and are truncated at zero with renormalized density.
class Prior {
public:
    enum class Kind { Uniform, Gaussian };

    static Prior uniform(double low, double high);
    static Prior gaussian(double mean, double variance);

    Kind kind() const { return kind_; }
    double low() const { return a_; }
    double high() const { return b_; }
    double gaussian_mean() const { return a_; }
    double gaussian_variance() const { return b_; }

    double density(double x) const;
    double sample(Rng& rng) const;

    /// Mean of the distribution actually sampled (truncated for Gaussians).
    double mean() const;

private:
    Prior(Kind k, double a, double b) : kind_(k), a_(a), b_(b) {}
    Kind kind_;
    double a_, b_; // uniform: low/high; gaussian: mean/variance
};

/// Ordered set of independent priors over the calibrated parameters,
/// matching the ParameterVector ordering.
class PriorSet {
public:
    void add(std::string name, Prior prior);

    std::size_t size() const { return names_.size(); }
    bool empty() const { return names_.empty(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    const Prior& prior(std::size_t i) const { return priors_[i]; }
    int index_of(std::string_view name) const;
    void replace(std::size_t i, Prior prior) { priors_[i] = prior; }

    /// Ordered independent draws.
    Eigen::VectorXd sample(Rng& rng) const;

    /// Product of the per-parameter densities; zero outside any support.
    double density(const Eigen::VectorXd& v) const;

    Eigen::VectorXd means() const;

    /// Entries as a ParameterVector with units from the field registry
    /// (empty unit for non-converter names).
    ParameterVector to_parameter_vector(const Eigen::VectorXd& values) const;

private:
    std::vector<std::string> names_;
    std::vector<Prior> priors_;
};

/// One independent draw per parameter, reproducible from the seed.
ParameterVector sample_prior(const PriorSet& priors, std::uint64_t seed);

/// Joint density of v under priors; v must be ordered as priors.
double prior_density(const PriorSet& priors, const ParameterVector& v);

/// Pilot procedure replacing an uninformative broad prior by a Gaussian
/// fitted around the lowest-discrepancy probe samples.
struct PriorCorrectionConfig {
    std::size_t N0 = 200;      // probe simulations
    std::size_t Np = 20;       // retained smallest discrepancies
    double broad_low = 0.0;    // broad uniform prior support
    double broad_high = 1.0;
    std::string target_parameter;
    std::uint64_t seed = 0;
    unsigned workers = 0;      // 0 = hardware concurrency
    ConverterSpec scenario;    // model used for the probe simulations

    void validate() const;
};

struct PriorCorrectionResult {
    double mean = 0.0;     // parameter value of the best probe
    double variance = 0.0; // spread of the retained probe values about it
    std::size_t n_divergent = 0;
    std::vector<std::pair<double, double>> retained; // (value, discrepancy)
};

/// Core routine against an arbitrary scalar discrepancy function
/// (returns +inf for a divergent probe).
PriorCorrectionResult correct_prior_core(const PriorCorrectionConfig& cfg,
                                         const std::function<double(double)>& discrepancy);

/// Probe value for index i, exposed so tests can reproduce the draw stream.
double correction_probe_value(const PriorCorrectionConfig& cfg, std::size_t i);

/// Production correction: simulates cfg.scenario with the target parameter
/// swept over the broad prior, all other parameters fixed at fixed_others.
PriorCorrectionResult correct_prior(const PriorCorrectionConfig& cfg,
                                    const ParameterVector& fixed_others,
                                    const Waveform& measurements);

} // namespace bucksmc
