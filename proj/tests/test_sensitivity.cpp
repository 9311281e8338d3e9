#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bucksmc/sensitivity.hpp"

using namespace bucksmc;

namespace {

std::vector<std::string> reference_parameters() {
    return {"L", "C_2", "R_s", "L_s", "C_in", "R_c1", "R_c2", "C_1"};
}

SensitivityConfig reference_config() {
    SensitivityConfig cfg;
    cfg.parameter_names = reference_parameters();
    cfg.scenario = ConverterSpec{};
    return cfg;
}

} // namespace

TEST_CASE("formula core on hand-written trajectories") {
    Waveform plus, minus;
    for (int k = 0; k < 4; ++k) {
        plus.t.push_back(k * 1e-6);
        minus.t.push_back(k * 1e-6);
        plus.V_out.push_back(1.0 + 0.1);
        minus.V_out.push_back(1.0);
        plus.I_out.push_back(2.0);
        minus.I_out.push_back(2.0 + 0.2);
    }
    // sum_k (0.1 + 0.2) / (4 * 2 * 0.05) = 1.2 / 0.4
    CHECK(sensitivity_from_waveforms(plus, minus, 0.05) ==
          doctest::Approx(3.0).epsilon(1e-15));
    // per-channel scaling
    CHECK(sensitivity_from_waveforms(plus, minus, 0.05, 1.0, 0.0) ==
          doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("central difference matches the analytic RC derivative") {
    // RC charging: v(t) = V0 (1 - exp(-t / (R C))), i(t) = (V0/R) exp(-t/(RC))
    const double v0 = 5.0, r = 100.0, c = 1e-6;
    const double delta = 0.02;
    const int n = 200;
    const double dt = 2e-6;

    auto sample = [&](double rr) {
        Waveform w;
        for (int k = 0; k < n; ++k) {
            const double t = k * dt;
            w.t.push_back(t);
            w.V_out.push_back(v0 * (1.0 - std::exp(-t / (rr * c))));
            w.I_out.push_back(v0 / rr * std::exp(-t / (rr * c)));
        }
        return w;
    };
    const double got =
        sensitivity_from_waveforms(sample(r * (1 + delta)), sample(r * (1 - delta)), delta);

    // derivative-based limit: sum_k (|dv/dR| + |di/dR|) * R / K
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
        const double t = k * dt;
        const double e = std::exp(-t / (r * c));
        const double dv_dr = -v0 * e * t / (r * r * c);
        const double di_dr = v0 / (r * r) * e * (t / (r * c) - 1.0);
        acc += (std::abs(dv_dr) + std::abs(di_dr)) * r;
    }
    const double want = acc / n;
    CHECK(got == doctest::Approx(want).epsilon(0.01));
}

TEST_CASE("a parameter with no influence scores zero") {
    SensitivityConfig cfg = reference_config();
    cfg.scenario.R_c2 = 1e12; // branch 2 is effectively disconnected
    cfg.scenario.t_end = 0.5e-3;
    const double s_c2 = trajectory_sensitivity(cfg, "C_2");
    CHECK(s_c2 >= 0.0);
    CHECK(s_c2 < 1e-9);
    const double s_rc2 = trajectory_sensitivity(cfg, "R_c2");
    CHECK(s_rc2 < 1e-9);
}

TEST_CASE("zero-valued parameters cannot be perturbed relatively") {
    SensitivityConfig cfg = reference_config();
    cfg.scenario.V_d = 0.0;
    CHECK_THROWS_AS(trajectory_sensitivity(cfg, "V_d"), SpecError);
}

TEST_CASE("reference scenario ranks the main inductance first") {
    SensitivityConfig cfg = reference_config();
    const SensitivityReport rep = rank_parameters(cfg);
    REQUIRE(rep.entries.size() == 8);
    CHECK(rep.entries[0].name == "L");
    CHECK(rep.entries[0].normalized == 1.0);
    CHECK_FALSE(rep.zero_normalization);
    for (std::size_t i = 1; i < rep.entries.size(); ++i) {
        CHECK(rep.entries[i].normalized <= rep.entries[i - 1].normalized);
        CHECK(rep.entries[i].normalized >= 0.0);
        CHECK(rep.entries[i].normalized <= 1.0);
    }
    int ones = 0;
    for (const auto& e : rep.entries)
        if (e.normalized == 1.0) ++ones;
    CHECK(ones == 1);
}

TEST_CASE("single parameter normalizes to one") {
    SensitivityConfig cfg = reference_config();
    cfg.parameter_names = {"L"};
    cfg.scenario.t_end = 0.5e-3;
    const SensitivityReport rep = rank_parameters(cfg);
    REQUIRE(rep.entries.size() == 1);
    CHECK(rep.entries[0].normalized == 1.0);
}

TEST_CASE("symmetric branches get equal sensitivities, deterministic order") {
    SensitivityConfig cfg = reference_config();
    cfg.scenario.R_c2 = cfg.scenario.R_c1; // make the two output branches identical
    cfg.scenario.t_end = 0.5e-3;
    cfg.parameter_names = {"C_2", "C_1"};
    const SensitivityReport a = rank_parameters(cfg);
    REQUIRE(a.entries.size() == 2);
    CHECK(a.entries[0].raw == doctest::Approx(a.entries[1].raw).epsilon(1e-9));
    const SensitivityReport b = rank_parameters(cfg);
    CHECK(a.entries[0].name == b.entries[0].name);
    CHECK(a.entries[0].raw == b.entries[0].raw);
    CHECK(a.entries[1].raw == b.entries[1].raw);
}

TEST_CASE("exact ties order lexicographically") {
    std::vector<SensitivityReport::Entry> e = {
        {"R_s", 2.0, 1.0}, {"L", 2.0, 1.0}, {"C_in", 1.0, 0.5}};
    sort_report_entries(e);
    CHECK(e[0].name == "L");
    CHECK(e[1].name == "R_s");
    CHECK(e[2].name == "C_in");
}

TEST_CASE("top-3 ranking is stable across perturbation sizes") {
    SensitivityConfig cfg = reference_config();
    cfg.scenario.t_end = 1e-3;
    std::vector<std::string> top_prev;
    for (double d : {0.01, 0.02, 0.05}) {
        cfg.relative_perturbation = d;
        const SensitivityReport rep = rank_parameters(cfg);
        std::vector<std::string> top = {rep.entries[0].name, rep.entries[1].name,
                                        rep.entries[2].name};
        if (!top_prev.empty()) CHECK(top == top_prev);
        top_prev = top;
    }
}

TEST_CASE("config validation rejects bad perturbations and names") {
    SensitivityConfig cfg = reference_config();
    cfg.relative_perturbation = 0.0;
    CHECK_THROWS_AS(cfg.validate(), SpecError);
    cfg.relative_perturbation = 1.0;
    CHECK_THROWS_AS(cfg.validate(), SpecError);
    cfg = reference_config();
    cfg.parameter_names.push_back("R_x");
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("R_x"), SpecError);
    cfg = reference_config();
    cfg.parameter_names.clear();
    CHECK_THROWS_AS(cfg.validate(), SpecError);
}
