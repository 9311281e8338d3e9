#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bucksmc/smc.hpp"
#include "bucksmc/stats.hpp"

using namespace bucksmc;

namespace {

Waveform make_wave(const std::vector<double>& v, const std::vector<double>& i) {
    Waveform w;
    for (std::size_t k = 0; k < v.size(); ++k) w.t.push_back(static_cast<double>(k) * 1e-6);
    w.V_out = v;
    w.I_out = i;
    return w;
}

std::vector<std::size_t> argsort(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    return idx;
}

PriorSet one_uniform(double lo, double hi) {
    PriorSet p;
    p.add("theta", Prior::uniform(lo, hi));
    return p;
}

} // namespace

TEST_CASE("distance is the normalized stacked L2 norm") {
    const Waveform a = make_wave({1.0, 2.0}, {3.0, 4.0});
    CHECK(distance(a, a) == 0.0);

    // every entry off by one, K = 2: sqrt(4) / 4
    const Waveform b = make_wave({2.0, 3.0}, {4.0, 5.0});
    CHECK(distance(b, a) == doctest::Approx(0.5).epsilon(1e-15));

    // random vectors against an independently accumulated norm
    Rng rng(7);
    const std::size_t k = 64;
    std::vector<double> v1(k), i1(k), v2(k), i2(k);
    for (std::size_t j = 0; j < k; ++j) {
        v1[j] = rng.normal();
        i1[j] = rng.normal();
        v2[j] = rng.normal();
        i2[j] = rng.normal();
    }
    double sq = 0.0;
    for (std::size_t j = 0; j < k; ++j)
        sq += std::pow(v1[j] - v2[j], 2) + std::pow(i1[j] - i2[j], 2);
    const double want = std::sqrt(sq) / (2.0 * static_cast<double>(k));
    const double got = distance(make_wave(v1, i1), make_wave(v2, i2));
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("distance refuses mismatched grids") {
    const Waveform a = make_wave({1.0, 2.0}, {0.0, 0.0});
    Waveform b = a;
    b.t[1] += 1e-6;
    CHECK_THROWS_AS(distance(a, b), GridMismatchError);
    Waveform c = make_wave({1.0}, {0.0});
    CHECK_THROWS_AS(distance(a, c), GridMismatchError);
}

TEST_CASE("first-iteration weights are normalized reciprocals") {
    const std::vector<double> w = initial_weights({1.0, 2.0, 4.0});
    CHECK(w[0] == doctest::Approx(4.0 / 7.0).epsilon(1e-15));
    CHECK(w[1] == doctest::Approx(2.0 / 7.0).epsilon(1e-15));
    CHECK(w[2] == doctest::Approx(1.0 / 7.0).epsilon(1e-15));

    const std::vector<double> eq = initial_weights({3.0, 3.0, 3.0, 3.0});
    for (double x : eq) CHECK(x == doctest::Approx(0.25).epsilon(1e-15));

    Rng rng(11);
    std::vector<double> rhos(50);
    for (double& r : rhos) r = 0.1 + rng.uniform01();
    const std::vector<double> got = initial_weights(rhos);
    double sum = 0.0;
    for (double r : rhos) sum += 1.0 / r;
    for (std::size_t i = 0; i < rhos.size(); ++i)
        CHECK(got[i] == doctest::Approx((1.0 / rhos[i]) / sum).epsilon(1e-12));

    bool clamped = false;
    const std::vector<double> z = initial_weights({0.0, 1.0}, &clamped);
    CHECK(clamped);
    CHECK(z[0] > z[1]);
    CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("adaptive weight trades prior against discrepancy") {
    CHECK(adaptive_weight(0.5, 2.0, 0.4) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(adaptive_weight(0.7, 3.0, 1.0) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(adaptive_weight(0.7, 4.0, 0.0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("boundary values of beta reproduce the limiting rankings") {
    Rng rng(3);
    std::vector<double> pi(20), rho(20), w0(20), w1(20), recip(20);
    for (std::size_t i = 0; i < 20; ++i) {
        pi[i] = rng.uniform01() * 10.0;
        rho[i] = 0.01 + rng.uniform01();
        w0[i] = adaptive_weight(pi[i], rho[i], 0.0);
        w1[i] = adaptive_weight(pi[i], rho[i], 1.0);
        recip[i] = 1.0 / rho[i];
    }
    CHECK(argsort(w0) == argsort(recip));
    CHECK(argsort(w1) == argsort(pi));
}

TEST_CASE("pilot threshold is the median") {
    CHECK(init_threshold({1.0, 2.0, 3.0, 4.0}) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(init_threshold({7.0, 7.0, 7.0}) == 7.0);

    Rng rng(5);
    std::vector<double> rhos(100);
    for (double& r : rhos) r = rng.uniform01();
    std::vector<double> sorted = rhos;
    std::sort(sorted.begin(), sorted.end());
    const double want = 0.5 * (sorted[49] + sorted[50]);
    CHECK(init_threshold(rhos) == want);
}

TEST_CASE("threshold adaptation takes the q-quantile and always decreases") {
    CHECK(next_threshold({1.0, 2.0, 3.0, 4.0}, 0.75, 100.0) ==
          doctest::Approx(3.25).epsilon(1e-15));
    CHECK(next_threshold({5.0, 5.0, 5.0}, 0.75, 5.0) == doctest::Approx(0.95 * 5.0));
    // q near one degenerates to the maximum, capped by the forced decrease
    CHECK(next_threshold({1.0, 2.0, 3.0}, 0.999999, 2.5) == doctest::Approx(0.95 * 2.5));
    CHECK(next_threshold({1.0, 2.0, 3.0}, 0.999999, 100.0) ==
          doctest::Approx(3.0).epsilon(1e-5));
}

namespace {

Population two_point_population() {
    PriorSet ps = one_uniform(-10.0, 10.0);
    Population pop;
    pop.t = 1;
    for (double v : {0.0, 2.0}) {
        Particle p;
        p.params = ps.to_parameter_vector(Eigen::VectorXd::Constant(1, v));
        p.rho = 1.0;
        p.weight = 0.5;
        pop.particles.push_back(p);
    }
    return pop;
}

} // namespace

TEST_CASE("kernel covariance doubles the weighted population covariance") {
    const PerturbationKernel k = fit_kernel(two_point_population());
    CHECK(k.gamma(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(k.chol_l(0, 0) * k.chol_l(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK_FALSE(k.regularized);
}

TEST_CASE("identical particles produce a regularized near-zero kernel") {
    Population pop = two_point_population();
    pop.particles[1].params[0].value = 0.0;
    const PerturbationKernel k = fit_kernel(pop);
    CHECK(k.regularized);
    CHECK(k.chol_l(0, 0) > 0.0);
    CHECK(k.chol_l(0, 0) < 1e-5);
}

TEST_CASE("kernel covariance matches a direct weighted-covariance oracle") {
    Rng rng(17);
    PriorSet ps;
    ps.add("a", Prior::uniform(-100.0, 100.0));
    ps.add("b", Prior::uniform(-100.0, 100.0));
    ps.add("c", Prior::uniform(-100.0, 100.0));
    Population pop;
    const std::size_t n = 50;
    std::vector<double> w(n);
    double sum = 0.0;
    for (double& x : w) {
        x = 0.01 + rng.uniform01();
        sum += x;
    }
    Eigen::MatrixXd vals(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd v(3);
        v << rng.normal() * 2.0, rng.normal() * 0.5, rng.normal();
        vals.row(i) = v.transpose();
        Particle p;
        p.params = ps.to_parameter_vector(v);
        p.rho = 1.0;
        p.weight = w[i] / sum;
        pop.particles.push_back(p);
    }
    const PerturbationKernel k = fit_kernel(pop);

    Eigen::VectorXd mu = Eigen::VectorXd::Zero(3);
    for (std::size_t i = 0; i < n; ++i) mu += (w[i] / sum) * vals.row(i).transpose();
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(3, 3);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd d = vals.row(i).transpose() - mu;
        gamma += (w[i] / sum) * d * d.transpose();
    }
    CHECK((k.gamma - gamma).norm() <= 1e-10 * gamma.norm());
}

TEST_CASE("kernel density matches the closed-form gaussian") {
    const PerturbationKernel k = fit_kernel(two_point_population());
    Eigen::VectorXd x(1), p(1);
    x << 1.3;
    p << 0.4;
    const double sigma2 = 2.0; // 2 * gamma
    const double want = normal_pdf((1.3 - 0.4) / std::sqrt(sigma2)) / std::sqrt(sigma2);
    CHECK(k.density(x, p) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("baseline weight reduces to pi/kappa for a single parent") {
    Population pop = two_point_population();
    pop.particles.resize(1);
    pop.particles[0].weight = 1.0;
    const PerturbationKernel k = fit_kernel(two_point_population());
    Eigen::VectorXd cand(1);
    cand << 0.7;
    Eigen::VectorXd parent(1);
    parent << 0.0;
    const double want = 0.3 / k.density(cand, parent);
    CHECK(baseline_weight(0.3, pop, cand, k) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("baseline weight matches a direct summation oracle") {
    Rng rng(23);
    PriorSet ps = one_uniform(-50.0, 50.0);
    Population pop;
    std::vector<double> w = {0.1, 0.3, 0.2, 0.25, 0.15};
    std::vector<double> v = {-1.0, 0.5, 1.5, 2.0, 3.3};
    for (std::size_t i = 0; i < w.size(); ++i) {
        Particle p;
        p.params = ps.to_parameter_vector(Eigen::VectorXd::Constant(1, v[i]));
        p.rho = 1.0;
        p.weight = w[i];
        pop.particles.push_back(p);
    }
    const PerturbationKernel k = fit_kernel(pop);
    Eigen::VectorXd cand(1);
    cand << 1.1;
    double denom = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        denom += w[i] * k.density(cand, Eigen::VectorXd::Constant(1, v[i]));
    const double pi = 0.42;
    CHECK(baseline_weight(pi, pop, cand, k) == doctest::Approx(pi / denom).epsilon(1e-12));
}

namespace {

EngineConfig small_cfg(std::size_t n = 64, int t = 6) {
    EngineConfig cfg;
    cfg.N = n;
    cfg.T = t;
    cfg.seed = 99;
    cfg.workers = 1;
    return cfg;
}

DiscrepancyFn quadratic_stub(double target) {
    return [target](const ParameterVector& pv) {
        const double th = pv[0].value;
        return (th - target) * (th - target);
    };
}

} // namespace

TEST_CASE("quadratic stub posterior concentrates and sharpens monotonically") {
    const EngineConfig cfg = small_cfg(128, 8);
    const PriorSet priors = one_uniform(0.0, 1.0);
    const SmcResult res = smc_run(cfg, priors, quadratic_stub(0.3));

    REQUIRE(res.populations.size() >= 3);
    double prev_sd = 1e300;
    for (const auto& pop : res.populations) {
        const double sd = pop.weighted_std()[0];
        CHECK(sd <= prev_sd * (1.0 + 1e-12));
        prev_sd = sd;
    }
    const Eigen::VectorXd mean = res.final_population().weighted_mean();
    CHECK(mean[0] == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("run invariants: thresholds, acceptance, weights, support") {
    const EngineConfig cfg = small_cfg(96, 7);
    const PriorSet priors = one_uniform(0.0, 1.0);
    const SmcResult res = smc_run(cfg, priors, quadratic_stub(0.62));

    const auto& eps = res.schedule.epsilons;
    REQUIRE(eps.size() == res.populations.size());
    for (std::size_t i = 1; i < eps.size(); ++i) CHECK(eps[i] < eps[i - 1]);

    for (std::size_t gi = 0; gi < res.populations.size(); ++gi) {
        const Population& pop = res.populations[gi];
        CHECK(pop.epsilon_used == eps[gi]);
        CHECK(pop.particles.size() == cfg.N);
        double wsum = 0.0;
        for (const Particle& p : pop.particles) {
            CHECK(p.rho <= pop.epsilon_used);
            CHECK(prior_density(priors, p.params) > 0.0);
            wsum += p.weight;
        }
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(pop.diagnostics.acc > 0.0);
        CHECK(pop.diagnostics.acc <= 1.0);
        CHECK(pop.diagnostics.n_sims >= pop.particles.size());
    }
}

TEST_CASE("population kernel statistics stay symmetric positive-semidefinite") {
    PriorSet priors;
    priors.add("a", Prior::uniform(0.0, 1.0));
    priors.add("b", Prior::uniform(0.0, 2.0));
    EngineConfig cfg = small_cfg(64, 5);
    const SmcResult res = smc_run(cfg, priors, [](const ParameterVector& pv) {
        const double a = pv[0].value - 0.4, b = pv[1].value - 1.1;
        return a * a + 0.5 * b * b;
    });
    for (const Population& pop : res.populations) {
        REQUIRE(pop.kernel_cov.rows() == 2);
        CHECK((pop.kernel_cov - pop.kernel_cov.transpose()).norm() <=
              1e-14 * (1.0 + pop.kernel_cov.norm()));
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pop.kernel_cov);
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
            CHECK(es.eigenvalues()[i] >= -1e-14 * (1.0 + pop.kernel_cov.norm()));
    }
}

TEST_CASE("identical seeds give identical runs regardless of worker count") {
    const PriorSet priors = one_uniform(0.0, 1.0);
    EngineConfig a = small_cfg(48, 4);
    EngineConfig b = a;
    b.workers = 4;
    const SmcResult ra = smc_run(a, priors, quadratic_stub(0.5));
    const SmcResult rb = smc_run(b, priors, quadratic_stub(0.5));
    REQUIRE(ra.populations.size() == rb.populations.size());
    CHECK(ra.schedule.epsilons == rb.schedule.epsilons);
    for (std::size_t g = 0; g < ra.populations.size(); ++g) {
        const auto& pa = ra.populations[g].particles;
        const auto& pb = rb.populations[g].particles;
        REQUIRE(pa.size() == pb.size());
        CHECK(ra.populations[g].diagnostics.n_sims == rb.populations[g].diagnostics.n_sims);
        for (std::size_t i = 0; i < pa.size(); ++i) {
            CHECK(pa[i].params[0].value == pb[i].params[0].value);
            CHECK(pa[i].rho == pb[i].rho);
            CHECK(pa[i].weight == pb[i].weight);
        }
    }
}

TEST_CASE("huge epsilon_min stops after one generation of pure prior draws") {
    EngineConfig cfg = small_cfg(256, 10);
    cfg.epsilon_min = 1e100;
    const PriorSet priors = one_uniform(2.0, 3.0);
    const SmcResult res = smc_run(cfg, priors, [](const ParameterVector&) { return 1.0; });
    REQUIRE(res.populations.size() == 1);
    CHECK(res.pilot_sims == 2 * cfg.N);
    for (const Particle& p : res.final_population().particles) {
        CHECK(p.params[0].value >= 2.0);
        CHECK(p.params[0].value <= 3.0);
        CHECK(p.weight == doctest::Approx(1.0 / 256.0).epsilon(1e-12));
    }
}

TEST_CASE("exhausted budget yields a flagged partial population") {
    EngineConfig cfg = small_cfg(8, 5);
    cfg.budget_factor = 2;
    const PriorSet priors = one_uniform(0.0, 1.0);
    // constant discrepancy: generation 2 can never beat the forced decrease
    const SmcResult res = smc_run(cfg, priors, [](const ParameterVector&) { return 1.0; });
    CHECK(res.truncated);
    const Population& last = res.final_population();
    CHECK(last.diagnostics.truncated);
    CHECK(last.particles.size() < cfg.N);
    CHECK(last.diagnostics.n_sims == cfg.budget_factor * cfg.N);
}

TEST_CASE("weight schemes coincide on a flat stub") {
    EngineConfig cfg = small_cfg(32, 2);
    cfg.budget_factor = 4;
    const PriorSet priors = one_uniform(0.0, 1.0);
    const auto rows = compare_weight_schemes(cfg, priors,
                                             [](const ParameterVector&) { return 1.0; }, 3);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        CHECK(r.proposed.acc_iter2 == r.baseline.acc_iter2);
        CHECK(r.proposed.total_sims == r.baseline.total_sims);
    }
}
