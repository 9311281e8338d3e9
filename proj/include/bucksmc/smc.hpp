#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bucksmc/converter.hpp"
#include "bucksmc/parameters.hpp"
#include "bucksmc/priors.hpp"
#include "bucksmc/rng.hpp"

namespace bucksmc {

/// L2 discrepancy between two waveforms on the same sample grid:
/// rho = ||z - z*||_2 / (2K) with z the stacked [V_out; I_out] vector.
/// Throws GridMismatchError when the grids differ; no silent resampling.
double distance(const Waveform& z, const Waveform& z_star);

/// First-iteration weights w_i proportional to 1/rho_i, normalized to sum 1.
/// A zero discrepancy is clamped at 1e-30; *clamped reports that it happened.
std::vector<double> initial_weights(const std::vector<double>& rhos,
                                    bool* clamped = nullptr);

/// Later-iteration unnormalized weight: beta * prior_dens + (1 - beta) / rho.
double adaptive_weight(double prior_dens, double rho, double beta);

/// Linear-interpolated q-quantile of the values (q in [0, 1]).
double linear_quantile(std::vector<double> values, double q);

/// First tolerance: median of the pilot discrepancies (even count: mean of
/// the two central order statistics).
double init_threshold(const std::vector<double>& pilot_rhos);

/// Next tolerance: linear-interpolated q-quantile of the accepted
/// discrepancies, forced strictly below the current tolerance
/// (0.95 * eps_current when the quantile fails to decrease).
double next_threshold(const std::vector<double>& accepted_rhos, double q,
                      double eps_current);

/// Gaussian perturbation kernel N(parent, 2 * Gamma) fitted to a population.
struct PerturbationKernel {
    Eigen::MatrixXd gamma;  // weighted empirical covariance of the population
    Eigen::MatrixXd chol_l; // lower Cholesky factor of the (regularized) 2*Gamma
    double log_norm = 0.0;  // log MVN normalization for covariance 2*Gamma
    bool regularized = false;

    Eigen::VectorXd sample(const Eigen::VectorXd& parent, Rng& rng) const;
    double density(const Eigen::VectorXd& x, const Eigen::VectorXd& parent) const;
};

/// One accepted parameter sample with its discrepancy and weight.
struct Particle {
    ParameterVector params;
    double rho = 0.0;
    double weight = 0.0;
};

struct RunDiagnostics {
    std::size_t n_sims = 0;  // simulations spent by this generation
    double acc = 0.0;        // N / N_s
    double wall_time_s = 0.0;
    std::uint64_t seed = 0;  // root seed of the run
    bool truncated = false;
    bool rho_clamped = false;
    bool kernel_regularized = false;
};

/// One finalized generation: N particles, the tolerance they satisfied and
/// the kernel statistics used to propose the next generation.
struct Population {
    int t = 1;
    std::vector<Particle> particles;
    double epsilon_used = 0.0;
    Eigen::MatrixXd kernel_cov; // Gamma
    RunDiagnostics diagnostics;

    Eigen::MatrixXd values() const;        // |particles| x d
    Eigen::VectorXd weights() const;
    Eigen::VectorXd weighted_mean() const;
    Eigen::VectorXd weighted_std() const;
};

/// Realized tolerance sequence and its adaptation settings.
struct ThresholdSchedule {
    std::vector<double> epsilons; // strictly decreasing, one per generation
    double q = 0.75;
    double epsilon_min = 0.0;
    int T = 10;
    std::size_t K_ini = 0; // pilot simulation count (2N)
};

enum class WeightScheme { Proposed, Baseline };

struct EngineConfig {
    std::size_t N = 1000; // particles per generation
    int T = 10;           // maximum generations
    double q = 0.75;      // tolerance percentile
    double beta = 0.4;    // prior/discrepancy weight trade-off
    double epsilon_min = 0.0;
    WeightScheme weight_scheme = WeightScheme::Proposed;
    std::uint64_t seed = 0;
    std::size_t budget_factor = 500; // per-generation cap = budget_factor * N
    unsigned workers = 0;            // 0 = hardware concurrency

    void validate() const;
};

/// Discrepancy of one candidate against the measurements; +inf marks a
/// divergent simulation.
using DiscrepancyFn = std::function<double(const ParameterVector&)>;

struct SmcResult {
    std::vector<Population> populations;
    ThresholdSchedule schedule;
    std::size_t pilot_sims = 0;
    double total_wall_time_s = 0.0;
    bool truncated = false;

    const Population& final_population() const { return populations.back(); }
    std::size_t total_sims() const;
};

/// The adaptive ABC-SMC run: pilot tolerance, prior rejection generation,
/// then resample-perturb generations until epsilon_min or T. Reproducible
/// from cfg.seed for any worker count.
SmcResult smc_run(const EngineConfig& cfg, const PriorSet& priors,
                  const DiscrepancyFn& discrepancy);

/// Production entry point: candidates are simulated on the converter model
/// and compared against the measurements.
SmcResult smc_run(const EngineConfig& cfg, const PriorSet& priors,
                  const Waveform& measurements, const ConverterSpec& model);

PerturbationKernel fit_kernel(const Population& pop);

/// Eq-for-eq baseline importance weight (unnormalized):
/// prior_dens / sum_j w_j^(t-1) * kappa(candidate | parent_j).
double baseline_weight(double prior_dens, const Population& prev,
                       const Eigen::VectorXd& candidate,
                       const PerturbationKernel& kernel);

struct SchemeStats {
    std::vector<double> acc_per_iteration;
    double acc_iter2 = 0.0;   // acceptance rate of generation 2 (0 if absent)
    double acc_aggregate = 0.0;
    std::size_t total_sims = 0;
    bool truncated = false;
};

struct WeightComparisonRun {
    std::uint64_t seed = 0;
    SchemeStats proposed, baseline;
};

/// Paired runs (shared measurements, per-run seeds) under both weight
/// schemes; generation 1 is identical within a pair by construction.
std::vector<WeightComparisonRun> compare_weight_schemes(const EngineConfig& cfg,
                                                        const PriorSet& priors,
                                                        const DiscrepancyFn& discrepancy,
                                                        int runs);

std::vector<WeightComparisonRun> compare_weight_schemes(const EngineConfig& cfg,
                                                        const PriorSet& priors,
                                                        const Waveform& measurements,
                                                        const ConverterSpec& model,
                                                        int runs);

} // namespace bucksmc
