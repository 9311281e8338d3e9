#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "bucksmc/errors.hpp"

namespace bucksmc {

// State ordering used throughout: [i_Ls, v_Cin, i_L, v_C1, v_C2].
inline constexpr int kNumStates = 5;
enum StateIndex : int { kILs = 0, kVCin = 1, kIL = 2, kVC1 = 3, kVC2 = 4 };

using StateVec = Eigen::Matrix<double, kNumStates, 1>;
using StateMat = Eigen::Matrix<double, kNumStates, kNumStates>;
using OutputMat = Eigen::Matrix<double, 2, kNumStates>;
using OutputVec = Eigen::Vector2d;

/// Optional load change applied once during a run.
struct LoadStep {
    double time = 0.0;   // s
    double R_load = 0.0; // ohm, value after the step
};

/// Full circuit description of the buck converter: component values,
/// parasitics, PWM settings and the load scenario. SI units throughout.
struct ConverterSpec {
    double V_in = 12.0;    // input voltage, V
    double D = 0.275;      // duty ratio
    double f_sw = 200e3;   // switching frequency, Hz
    double L = 33e-6;      // main inductance, H
    double R_L = 0.03;     // main inductor series resistance, ohm
    double R_M = 0.05;     // MOSFET on-resistance, ohm
    double V_d = 0.0;      // diode forward drop, V
    double L_s = 0.4e-6;   // source inductance, H
    double R_s = 0.16;     // source resistance, ohm
    double C_in = 100e-6;  // input capacitance, F
    double R_cin = 0.02;   // input capacitor ESR, ohm
    double C_1 = 100e-6;   // output capacitance, branch 1, F
    double R_c1 = 0.065;   // branch 1 ESR, ohm
    double C_2 = 100e-6;   // output capacitance, branch 2, F
    double R_c2 = 0.3;     // branch 2 ESR, ohm
    double R_load = 3.3;   // load resistance, ohm
    std::optional<LoadStep> load_step;

    double t_end = 2e-3;       // s
    double sample_rate = 2e6;  // Hz
    int steps_per_period = 40; // integration sub-steps per switching period

    /// Throws SpecError naming the offending field.
    void validate() const;
};

/// Instantaneous circuit state. In diode-blocking (discontinuous
/// conduction) mode i_L is exactly zero.
struct CircuitState {
    double i_Ls = 0.0;
    double v_Cin = 0.0;
    double i_L = 0.0;
    double v_C1 = 0.0;
    double v_C2 = 0.0;
    double t = 0.0;
};

/// Sampled output trajectories z = [V_out; I_out] on a uniform grid.
struct Waveform {
    std::vector<double> t;     // s, uniform spacing 1/sample_rate
    std::vector<double> V_out; // V
    std::vector<double> I_out; // A

    std::size_t size() const { return t.size(); }
    bool empty() const { return t.empty(); }
};

/// One conduction mode of the switched network:
///   dx/dt = A x + B V_in + c,   [V_out; I_out] = C_out x + D_out V_in.
/// c collects the diode forward drop; it is zero when V_d = 0.
struct StateSpaceModel {
    StateMat A = StateMat::Zero();
    StateVec B = StateVec::Zero();
    OutputMat C_out = OutputMat::Zero();
    OutputVec D_out = OutputVec::Zero();
    StateVec c = StateVec::Zero();
};

/// Derives the linear network equations for one conduction mode of the
/// converter. switch_on and diode_conducting may not both be true (the
/// MOSFET forces the diode off). Throws DegenerateTopologyError when the
/// output network has no unique solution (zero load with both ESRs zero).
StateSpaceModel build_state_space(const ConverterSpec& spec, bool switch_on,
                                  bool diode_conducting);

/// Dense integration-grid record, used for diagnostics and tests.
struct SimulationTrace {
    std::vector<CircuitState> states;
    std::vector<double> V_out;
    std::vector<double> I_out;
};

/// Integrates the switched system from zero initial state over [0, t_end]
/// and samples the outputs at spec.sample_rate (nearest grid point).
/// Deterministic: identical inputs give bit-identical outputs. Throws
/// DivergenceError when any state magnitude exceeds 1e9.
Waveform simulate(const ConverterSpec& spec);

/// Same integration as simulate() but returns every integration grid point
/// with the full state vector.
SimulationTrace simulate_trace(const ConverterSpec& spec);

/// Last ceil(fraction * K) samples of w with time rebased to zero.
/// fraction must lie in (0, 1]; w must be non-empty.
Waveform steady_state_window(const Waveform& w, double fraction);

} // namespace bucksmc
