#include "bucksmc/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bucksmc/parallel.hpp"
#include "bucksmc/smc.hpp"
#include "bucksmc/stats.hpp"

namespace bucksmc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Prior Prior::uniform(double low, double high) {
    if (!std::isfinite(low) || !std::isfinite(high) || !(low < high))
        throw SpecError("uniform prior requires finite low < high");
    return Prior(Kind::Uniform, low, high);
}

Prior Prior::gaussian(double mean, double variance) {
    if (!std::isfinite(mean) || !std::isfinite(variance) || !(variance > 0.0))
        throw SpecError("gaussian prior requires finite mean and variance > 0");
    const double z = normal_cdf(mean / std::sqrt(variance));
    if (z < 1e-12)
        throw SpecError("gaussian prior has negligible mass above zero");
    return Prior(Kind::Gaussian, mean, variance);
}

double Prior::density(double x) const {
    if (!std::isfinite(x)) return 0.0;
    if (kind_ == Kind::Uniform)
        return (x >= a_ && x <= b_) ? 1.0 / (b_ - a_) : 0.0;
    if (x < 0.0) return 0.0;
    const double sigma = std::sqrt(b_);
    const double z = normal_cdf(a_ / sigma); // mass kept by the truncation
    return normal_pdf((x - a_) / sigma) / sigma / z;
}

double Prior::sample(Rng& rng) const {
    if (kind_ == Kind::Uniform) return rng.uniform(a_, b_);
    const double sigma = std::sqrt(b_);
    for (int i = 0; i < 1000000; ++i) {
        const double x = a_ + sigma * rng.normal();
        if (x >= 0.0) return x;
    }
    throw SpecError("truncated gaussian sampling failed to find mass above zero");
}

double Prior::mean() const {
    if (kind_ == Kind::Uniform) return 0.5 * (a_ + b_);
    const double sigma = std::sqrt(b_);
    const double alpha = -a_ / sigma;
    return a_ + sigma * normal_pdf(alpha) / (1.0 - normal_cdf(alpha));
}

void PriorSet::add(std::string name, Prior prior) {
    if (index_of(name) >= 0) throw SpecError("duplicate prior for '" + name + "'");
    names_.push_back(std::move(name));
    priors_.push_back(prior);
}

int PriorSet::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return static_cast<int>(i);
    return -1;
}

Eigen::VectorXd PriorSet::sample(Rng& rng) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i) v[static_cast<Eigen::Index>(i)] = priors_[i].sample(rng);
    return v;
}

double PriorSet::density(const Eigen::VectorXd& v) const {
    if (static_cast<std::size_t>(v.size()) != size())
        throw SpecError("prior density: dimension mismatch");
    double d = 1.0;
    for (std::size_t i = 0; i < size(); ++i) {
        d *= priors_[i].density(v[static_cast<Eigen::Index>(i)]);
        if (d == 0.0) return 0.0;
    }
    return d;
}

Eigen::VectorXd PriorSet::means() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i) v[static_cast<Eigen::Index>(i)] = priors_[i].mean();
    return v;
}

ParameterVector PriorSet::to_parameter_vector(const Eigen::VectorXd& values) const {
    if (static_cast<std::size_t>(values.size()) != size())
        throw SpecError("prior set: dimension mismatch");
    ParameterVector pv;
    for (std::size_t i = 0; i < size(); ++i) {
        std::string unit;
        for (const auto& f : converter_fields())
            if (names_[i] == f.name) unit = f.unit;
        pv.push_back(names_[i], values[static_cast<Eigen::Index>(i)], unit);
    }
    return pv;
}

ParameterVector sample_prior(const PriorSet& priors, std::uint64_t seed) {
    Rng rng(seed);
    return priors.to_parameter_vector(priors.sample(rng));
}

double prior_density(const PriorSet& priors, const ParameterVector& v) {
    if (v.size() != priors.size())
        throw SpecError("prior density: parameter count mismatch");
    Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i].name != priors.name(i))
            throw SpecError("prior density: parameter order mismatch at '" + v[i].name + "'");
        x[static_cast<Eigen::Index>(i)] = v[i].value;
    }
    return priors.density(x);
}

void PriorCorrectionConfig::validate() const {
    if (N0 < 1 || Np < 1 || Np > N0)
        throw SpecError("prior correction requires 1 <= Np <= N0");
    if (!std::isfinite(broad_low) || !std::isfinite(broad_high) || !(broad_low < broad_high))
        throw SpecError("prior correction requires finite broad_low < broad_high");
    if (target_parameter.empty())
        throw SpecError("prior correction requires a target parameter");
}

double correction_probe_value(const PriorCorrectionConfig& cfg, std::size_t i) {
    Rng rng(derive_seed(cfg.seed, 0x70726f62ULL, i));
    return rng.uniform(cfg.broad_low, cfg.broad_high);
}

PriorCorrectionResult correct_prior_core(const PriorCorrectionConfig& cfg,
                                         const std::function<double(double)>& discrepancy) {
    cfg.validate();
    std::vector<double> values(cfg.N0), rhos(cfg.N0);
    for (std::size_t i = 0; i < cfg.N0; ++i) values[i] = correction_probe_value(cfg, i);
    parallel_for(cfg.N0, cfg.workers, [&](std::size_t i) { rhos[i] = discrepancy(values[i]); });

    std::vector<std::size_t> order(cfg.N0);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rhos[a] < rhos[b]; });

    PriorCorrectionResult res;
    for (std::size_t i : order)
        if (!std::isfinite(rhos[i])) ++res.n_divergent;
    const std::size_t n_ok = cfg.N0 - res.n_divergent;
    if (n_ok == 0) throw CorrectionError("prior correction: every probe diverged");

    const std::size_t n_keep = std::min(cfg.Np, n_ok);
    res.mean = values[order[0]];
    double acc = 0.0;
    for (std::size_t k = 0; k < n_keep; ++k) {
        const std::size_t i = order[k];
        res.retained.emplace_back(values[i], rhos[i]);
        acc += (values[i] - res.mean) * (values[i] - res.mean);
    }
    res.variance = acc / static_cast<double>(n_keep);
    return res;
}

PriorCorrectionResult correct_prior(const PriorCorrectionConfig& cfg,
                                    const ParameterVector& fixed_others,
                                    const Waveform& measurements) {
    cfg.validate();
    const ConverterSpec base = apply_overrides(cfg.scenario, fixed_others);
    field_info(cfg.target_parameter); // fail early on unknown names
    return correct_prior_core(cfg, [&](double value) {
        ConverterSpec probe = base;
        set_field(probe, cfg.target_parameter, value);
        try {
            return distance(simulate(probe), measurements);
        } catch (const DivergenceError&) {
            return kInf;
        }
    });
}

} // namespace bucksmc
