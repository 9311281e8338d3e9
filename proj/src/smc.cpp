#include "bucksmc/smc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "bucksmc/parallel.hpp"

namespace bucksmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRhoClamp = 1e-30;
constexpr std::size_t kProposalBlock = 256;

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

} // namespace

double distance(const Waveform& z, const Waveform& z_star) {
    const std::size_t k = z.size();
    if (k == 0 || z_star.size() != k)
        throw GridMismatchError("distance: waveforms have different sample counts");
    for (std::size_t i = 0; i < k; ++i) {
        const double tol = 1e-12 * std::max(1.0, std::abs(z_star.t[i]));
        if (std::abs(z.t[i] - z_star.t[i]) > tol)
            throw GridMismatchError("distance: sample grids differ; no resampling is performed");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double dv = z.V_out[i] - z_star.V_out[i];
        const double di = z.I_out[i] - z_star.I_out[i];
        acc += dv * dv + di * di;
    }
    return std::sqrt(acc) / (2.0 * static_cast<double>(k));
}

std::vector<double> initial_weights(const std::vector<double>& rhos, bool* clamped) {
    if (rhos.empty()) throw SpecError("initial_weights: empty discrepancy list");
    if (clamped) *clamped = false;
    std::vector<double> w(rhos.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < rhos.size(); ++i) {
        double r = rhos[i];
        if (r < kRhoClamp) {
            r = kRhoClamp;
            if (clamped) *clamped = true;
        }
        w[i] = 1.0 / r;
        sum += w[i];
    }
    for (double& x : w) x /= sum;
    return w;
}

double adaptive_weight(double prior_dens, double rho, double beta) {
    if (beta < 0.0 || beta > 1.0) throw SpecError("adaptive_weight: beta must lie in [0, 1]");
    if (rho < kRhoClamp) rho = kRhoClamp;
    return beta * prior_dens + (1.0 - beta) / rho;
}

double linear_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw SpecError("quantile of an empty list");
    if (q < 0.0 || q > 1.0) throw SpecError("quantile fraction must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    if (lo + 1 >= values.size()) return values.back();
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0) return values[lo];
    // interpolating into an infinite order statistic stays infinite
    if (!std::isfinite(values[lo]) || !std::isfinite(values[lo + 1]))
        return std::max(values[lo], values[lo + 1]);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

double init_threshold(const std::vector<double>& pilot_rhos) {
    if (pilot_rhos.empty()) throw SpecError("init_threshold: no pilot discrepancies");
    return linear_quantile(pilot_rhos, 0.5);
}

double next_threshold(const std::vector<double>& accepted_rhos, double q,
                      double eps_current) {
    if (!(q > 0.0) || !(q < 1.0)) throw SpecError("next_threshold: q must lie in (0, 1)");
    const double eps = linear_quantile(accepted_rhos, q);
    return eps < eps_current ? eps : 0.95 * eps_current;
}

Eigen::VectorXd PerturbationKernel::sample(const Eigen::VectorXd& parent, Rng& rng) const {
    Eigen::VectorXd z(parent.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return parent + chol_l * z;
}

double PerturbationKernel::density(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& parent) const {
    const Eigen::VectorXd d = x - parent;
    const Eigen::VectorXd y = chol_l.triangularView<Eigen::Lower>().solve(d);
    return std::exp(log_norm - 0.5 * y.squaredNorm());
}

Eigen::MatrixXd Population::values() const {
    const std::size_t n = particles.size();
    const std::size_t d = n ? particles[0].params.size() : 0;
    Eigen::MatrixXd x(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(i, j) = particles[i].params[j].value;
    return x;
}

Eigen::VectorXd Population::weights() const {
    Eigen::VectorXd w(particles.size());
    for (std::size_t i = 0; i < particles.size(); ++i) w[i] = particles[i].weight;
    return w;
}

Eigen::VectorXd Population::weighted_mean() const {
    return values().transpose() * weights();
}

Eigen::VectorXd Population::weighted_std() const {
    const Eigen::MatrixXd x = values();
    const Eigen::VectorXd w = weights();
    const Eigen::VectorXd mu = x.transpose() * w;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Eigen::VectorXd d = x.row(i).transpose() - mu;
        var += w[i] * d.cwiseProduct(d);
    }
    return var.cwiseSqrt();
}

PerturbationKernel fit_kernel(const Population& pop) {
    const Eigen::MatrixXd x = pop.values();
    const Eigen::VectorXd w = pop.weights();
    const Eigen::Index n = x.rows(), d = x.cols();
    if (n < 2) throw SpecError("fit_kernel: need at least two particles");

    const Eigen::VectorXd mu = x.transpose() * w;
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd dev = x.row(i).transpose() - mu;
        gamma += w[i] * dev * dev.transpose();
    }

    PerturbationKernel k;
    k.gamma = gamma;
    Eigen::MatrixXd cov = 2.0 * gamma;
    const double tr = cov.trace();
    double jitter = 1e-12 * (tr > 0.0 ? tr / static_cast<double>(d) : 0.0);
    for (int attempt = 0;; ++attempt) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success) {
            k.chol_l = llt.matrixL();
            bool ok = true;
            for (Eigen::Index i = 0; i < d; ++i)
                if (!(k.chol_l(i, i) > 0.0)) ok = false;
            if (ok) break;
        }
        k.regularized = true;
        if (jitter > 0.0 && attempt < 60) {
            cov.diagonal().array() += jitter;
            jitter *= 10.0;
        } else {
            // no usable scale left: floor each direction near its mean
            for (Eigen::Index i = 0; i < d; ++i) {
                const double floor_sd = 1e-12 * (1.0 + std::abs(mu[i]));
                cov(i, i) += floor_sd * floor_sd;
            }
            jitter = 0.0;
            if (attempt > 120) throw SpecError("fit_kernel: covariance regularization failed");
        }
    }
    double log_det_half = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) log_det_half += std::log(k.chol_l(i, i));
    k.log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * M_PI) - log_det_half;
    return k;
}

double baseline_weight(double prior_dens, const Population& prev,
                       const Eigen::VectorXd& candidate,
                       const PerturbationKernel& kernel) {
    double denom = 0.0;
    for (const Particle& p : prev.particles) {
        Eigen::VectorXd parent(candidate.size());
        for (Eigen::Index j = 0; j < candidate.size(); ++j)
            parent[j] = p.params[static_cast<std::size_t>(j)].value;
        denom += p.weight * kernel.density(candidate, parent);
    }
    if (denom <= 0.0) return -1.0; // rejected-particle signal
    return prior_dens / denom;
}

void EngineConfig::validate() const {
    if (N < 2) throw SpecError("EngineConfig: N must be >= 2");
    if (T < 1) throw SpecError("EngineConfig: T must be >= 1");
    if (!(q > 0.0) || !(q < 1.0)) throw SpecError("EngineConfig: q must lie in (0, 1)");
    if (!(beta >= 0.0 && beta <= 1.0)) throw SpecError("EngineConfig: beta must lie in [0, 1]");
    if (epsilon_min < 0.0) throw SpecError("EngineConfig: epsilon_min must be >= 0");
    if (budget_factor < 1) throw SpecError("EngineConfig: budget_factor must be >= 1");
}

std::size_t SmcResult::total_sims() const {
    std::size_t n = pilot_sims;
    for (const auto& p : populations) n += p.diagnostics.n_sims;
    return n;
}

namespace {

struct Candidate {
    Eigen::VectorXd theta;
    double rho = kInf;
    double prior_dens = 0.0;
    bool simulated = false;
};

class SmcEngine {
public:
    SmcEngine(const EngineConfig& cfg, const PriorSet& priors, const DiscrepancyFn& fn)
        : cfg_(cfg), priors_(priors), fn_(fn) {}

    SmcResult run() {
        cfg_.validate();
        if (priors_.empty()) throw SpecError("smc_run: empty prior set");
        const double t_start = now_s();

        SmcResult res;
        res.schedule.q = cfg_.q;
        res.schedule.epsilon_min = cfg_.epsilon_min;
        res.schedule.T = cfg_.T;
        res.schedule.K_ini = 2 * cfg_.N;

        // Pilot: 2N prior simulations fix the first tolerance at their median.
        std::vector<double> pilot(res.schedule.K_ini);
        parallel_for(pilot.size(), cfg_.workers, [&](std::size_t i) {
            Rng rng(derive_seed(cfg_.seed, 0, i));
            const Eigen::VectorXd theta = priors_.sample(rng);
            pilot[i] = evaluate(theta);
        });
        res.pilot_sims = pilot.size();
        double eps = init_threshold(pilot);

        PerturbationKernel kernel;
        for (int t = 1; t <= cfg_.T; ++t) {
            const double t_gen = now_s();
            Population pop = run_generation(t, eps,
                                            t > 1 ? &res.populations.back() : nullptr,
                                            t > 1 ? &kernel : nullptr);
            pop.diagnostics.wall_time_s = now_s() - t_gen;
            pop.diagnostics.seed = cfg_.seed;
            res.schedule.epsilons.push_back(eps);
            const bool truncated = pop.diagnostics.truncated;
            if (pop.particles.size() >= 2) {
                kernel = fit_kernel(pop);
                pop.kernel_cov = kernel.gamma;
                pop.diagnostics.kernel_regularized = kernel.regularized;
            } else {
                pop.kernel_cov = Eigen::MatrixXd::Zero(priors_.size(), priors_.size());
            }
            std::vector<double> rhos;
            rhos.reserve(pop.particles.size());
            for (const auto& p : pop.particles) rhos.push_back(p.rho);
            res.populations.push_back(std::move(pop));
            if (truncated) {
                res.truncated = true;
                break;
            }
            if (t == cfg_.T) break;
            eps = next_threshold(rhos, cfg_.q, eps);
            if (eps < cfg_.epsilon_min) break;
        }
        res.total_wall_time_s = now_s() - t_start;
        return res;
    }

private:
    double evaluate(const Eigen::VectorXd& theta) {
        return fn_(priors_.to_parameter_vector(theta));
    }

    Candidate make_candidate(int gen, std::size_t attempt, const Eigen::MatrixXd* prev_values,
                             const std::vector<double>* cdf, const PerturbationKernel* kernel) {
        Candidate c;
        Rng rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(gen), attempt));
        if (gen == 1) {
            c.theta = priors_.sample(rng);
            c.prior_dens = priors_.density(c.theta);
            c.rho = evaluate(c.theta);
            c.simulated = true;
            return c;
        }
        const double u = rng.uniform01();
        const auto it = std::upper_bound(cdf->begin(), cdf->end(), u);
        std::size_t parent = static_cast<std::size_t>(it - cdf->begin());
        if (parent >= static_cast<std::size_t>(prev_values->rows()))
            parent = static_cast<std::size_t>(prev_values->rows()) - 1;
        c.theta = kernel->sample(prev_values->row(static_cast<Eigen::Index>(parent)).transpose(), rng);
        c.prior_dens = priors_.density(c.theta);
        if (c.prior_dens == 0.0) return c; // outside prior support: no simulation
        c.rho = evaluate(c.theta);
        c.simulated = true;
        return c;
    }

    Population run_generation(int gen, double eps, const Population* prev,
                              const PerturbationKernel* kernel) {
        const std::size_t budget = cfg_.budget_factor * cfg_.N;
        const std::size_t attempt_cap = budget * 1000;
        const bool baseline = (cfg_.weight_scheme == WeightScheme::Baseline);

        Eigen::MatrixXd prev_values;
        std::vector<double> cdf;
        if (gen > 1) {
            prev_values = prev->values();
            cdf.resize(prev->particles.size());
            double acc = 0.0;
            for (std::size_t i = 0; i < cdf.size(); ++i) {
                acc += prev->particles[i].weight;
                cdf[i] = acc;
            }
            cdf.back() = 1.0;
        }

        std::vector<Candidate> accepted;
        accepted.reserve(cfg_.N);
        std::size_t n_sims = 0, attempt_base = 0;
        bool truncated = false;

        std::vector<Candidate> block(kProposalBlock);
        while (accepted.size() < cfg_.N) {
            if (n_sims >= budget || attempt_base >= attempt_cap) {
                truncated = true;
                break;
            }
            parallel_for(kProposalBlock, cfg_.workers, [&](std::size_t k) {
                block[k] = make_candidate(gen, attempt_base + k,
                                          gen > 1 ? &prev_values : nullptr,
                                          gen > 1 ? &cdf : nullptr, kernel);
            });
            for (std::size_t k = 0; k < kProposalBlock && accepted.size() < cfg_.N; ++k) {
                Candidate& c = block[k];
                if (!c.simulated) continue;
                ++n_sims;
                if (std::isfinite(c.rho) && c.rho <= eps) accepted.push_back(std::move(c));
                if (n_sims >= budget) break;
            }
            attempt_base += kProposalBlock;
        }
        if (accepted.size() < cfg_.N) truncated = true;

        Population pop;
        pop.t = gen;
        pop.epsilon_used = eps;
        pop.diagnostics.n_sims = n_sims;
        pop.diagnostics.acc =
            n_sims ? static_cast<double>(accepted.size()) / static_cast<double>(n_sims) : 0.0;
        pop.diagnostics.truncated = truncated;

        // Weights
        const std::size_t n = accepted.size();
        std::vector<double> w(n, 0.0);
        if (n > 0) {
            if (gen == 1) {
                if (baseline) {
                    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
                } else {
                    std::vector<double> rhos(n);
                    for (std::size_t i = 0; i < n; ++i) rhos[i] = accepted[i].rho;
                    bool clamped = false;
                    w = initial_weights(rhos, &clamped);
                    pop.diagnostics.rho_clamped = clamped;
                }
            } else if (baseline) {
                parallel_for(n, cfg_.workers, [&](std::size_t i) {
                    w[i] = baseline_weight(accepted[i].prior_dens, *prev, accepted[i].theta,
                                           *kernel);
                });
                for (double& x : w)
                    if (x < 0.0) x = 0.0; // kernel-unreachable candidate carries no weight
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    if (accepted[i].rho < kRhoClamp) pop.diagnostics.rho_clamped = true;
                    w[i] = adaptive_weight(accepted[i].prior_dens, accepted[i].rho, cfg_.beta);
                }
            }
            double sum = std::accumulate(w.begin(), w.end(), 0.0);
            if (!(sum > 0.0)) {
                std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
                sum = 1.0;
            }
            for (double& x : w) x /= sum;
        }

        pop.particles.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            Particle p;
            p.params = priors_.to_parameter_vector(accepted[i].theta);
            p.rho = accepted[i].rho;
            p.weight = w[i];
            pop.particles.push_back(std::move(p));
        }
        return pop;
    }

    EngineConfig cfg_;
    const PriorSet& priors_;
    const DiscrepancyFn& fn_;
};

} // namespace

SmcResult smc_run(const EngineConfig& cfg, const PriorSet& priors,
                  const DiscrepancyFn& discrepancy) {
    return SmcEngine(cfg, priors, discrepancy).run();
}

SmcResult smc_run(const EngineConfig& cfg, const PriorSet& priors,
                  const Waveform& measurements, const ConverterSpec& model) {
    const DiscrepancyFn fn = [&](const ParameterVector& pv) {
        try {
            return distance(simulate(model, pv), measurements);
        } catch (const DivergenceError&) {
            return kInf;
        }
    };
    return smc_run(cfg, priors, fn);
}

namespace {

SchemeStats scheme_stats(const SmcResult& r) {
    SchemeStats s;
    s.total_sims = r.total_sims();
    s.truncated = r.truncated;
    std::size_t n_accepted = 0;
    for (const auto& p : r.populations) {
        n_accepted += p.particles.size();
        s.acc_per_iteration.push_back(p.diagnostics.acc);
    }
    s.acc_aggregate =
        s.total_sims ? static_cast<double>(n_accepted) / static_cast<double>(s.total_sims) : 0.0;
    if (r.populations.size() >= 2) s.acc_iter2 = r.populations[1].diagnostics.acc;
    return s;
}

} // namespace

std::vector<WeightComparisonRun> compare_weight_schemes(const EngineConfig& cfg,
                                                        const PriorSet& priors,
                                                        const DiscrepancyFn& discrepancy,
                                                        int runs) {
    if (runs < 1) throw SpecError("compare_weight_schemes: runs must be >= 1");
    std::vector<WeightComparisonRun> out;
    out.reserve(static_cast<std::size_t>(runs));
    for (int r = 0; r < runs; ++r) {
        WeightComparisonRun row;
        row.seed = derive_seed(cfg.seed, 0x636d7072ULL, static_cast<std::uint64_t>(r));
        EngineConfig c = cfg;
        c.seed = row.seed;
        c.weight_scheme = WeightScheme::Proposed;
        row.proposed = scheme_stats(smc_run(c, priors, discrepancy));
        c.weight_scheme = WeightScheme::Baseline;
        row.baseline = scheme_stats(smc_run(c, priors, discrepancy));
        out.push_back(row);
    }
    return out;
}

std::vector<WeightComparisonRun> compare_weight_schemes(const EngineConfig& cfg,
                                                        const PriorSet& priors,
                                                        const Waveform& measurements,
                                                        const ConverterSpec& model,
                                                        int runs) {
    const DiscrepancyFn fn = [&](const ParameterVector& pv) {
        try {
            return distance(simulate(model, pv), measurements);
        } catch (const DivergenceError&) {
            return kInf;
        }
    };
    return compare_weight_schemes(cfg, priors, fn, runs);
}

} // namespace bucksmc
