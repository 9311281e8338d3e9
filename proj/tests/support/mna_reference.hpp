#pragma once

// Independent derivation of the converter's per-mode state-space matrices.
// Assembles the full network as a 9-unknown linear system (node voltages and
// branch currents) and reduces it numerically, instead of the production
// code's specialized elimination. Used to cross-check build_state_space.

#include <Eigen/Dense>

#include "bucksmc/converter.hpp"

namespace testsupport {

enum class RefMode { On, OffDiode, OffBlocking };

struct RefModel {
    bucksmc::StateMat A;
    bucksmc::StateVec B;
    bucksmc::StateVec c;
    bucksmc::OutputMat C_out;
    bucksmc::OutputVec D_out;
};

// Unknowns: u = [vA, vB, vC, i_Cin, i_C1, i_C2, i_sw, i_dio, i_load].
inline void mna_rhs(const bucksmc::ConverterSpec& s, RefMode mode,
                    const bucksmc::StateVec& x, double vin,
                    bucksmc::StateVec& dxdt, bucksmc::OutputVec& y) {
    using namespace bucksmc;
    Eigen::Matrix<double, 9, 9> m = Eigen::Matrix<double, 9, 9>::Zero();
    Eigen::Matrix<double, 9, 1> rhs = Eigen::Matrix<double, 9, 1>::Zero();

    // 0: KCL at input bus: i_Cin + i_sw = i_Ls
    m(0, 3) = 1.0;
    m(0, 6) = 1.0;
    rhs(0) = x[kILs];
    // 1: input capacitor branch: vA - R_cin i_Cin = v_Cin
    m(1, 0) = 1.0;
    m(1, 3) = -s.R_cin;
    rhs(1) = x[kVCin];
    // 2: KCL at switch node: i_sw + i_dio = i_L  (replaced in blocking mode)
    if (mode == RefMode::OffBlocking) {
        m(2, 1) = 1.0; // pin dangling node: vB = vC
        m(2, 2) = -1.0;
    } else {
        m(2, 6) = 1.0;
        m(2, 7) = 1.0;
        rhs(2) = x[kIL];
    }
    // 3: switch element
    if (mode == RefMode::On) {
        m(3, 0) = 1.0;
        m(3, 1) = -1.0;
        m(3, 6) = -s.R_M;
    } else {
        m(3, 6) = 1.0; // i_sw = 0
    }
    // 4: diode element
    if (mode == RefMode::OffDiode) {
        m(4, 1) = 1.0; // vB = -V_d
        rhs(4) = -s.V_d;
    } else {
        m(4, 7) = 1.0; // i_dio = 0
    }
    // 5: KCL at output node: i_C1 + i_C2 + i_load = i_L
    m(5, 4) = 1.0;
    m(5, 5) = 1.0;
    m(5, 8) = 1.0;
    rhs(5) = x[kIL];
    // 6-7: output capacitor branches
    m(6, 2) = 1.0;
    m(6, 4) = -s.R_c1;
    rhs(6) = x[kVC1];
    m(7, 2) = 1.0;
    m(7, 5) = -s.R_c2;
    rhs(7) = x[kVC2];
    // 8: load: vC - R_load i_load = 0
    m(8, 2) = 1.0;
    m(8, 8) = -s.R_load;

    Eigen::Matrix<double, 9, 1> u = m.fullPivLu().solve(rhs);
    const double vA = u[0], vB = u[1], vC = u[2];
    const double i_Cin = u[3], i_C1 = u[4], i_C2 = u[5], i_load = u[8];

    dxdt[kILs] = (vin - s.R_s * x[kILs] - vA) / s.L_s;
    dxdt[kVCin] = i_Cin / s.C_in;
    dxdt[kIL] = (mode == RefMode::OffBlocking)
                    ? 0.0
                    : (vB - s.R_L * x[kIL] - vC) / s.L;
    dxdt[kVC1] = i_C1 / s.C_1;
    dxdt[kVC2] = i_C2 / s.C_2;
    y << vC, i_load;
}

inline RefModel mna_reference_model(const bucksmc::ConverterSpec& s, RefMode mode) {
    using namespace bucksmc;
    RefModel out;
    StateVec dx0;
    OutputVec y0;
    mna_rhs(s, mode, StateVec::Zero(), 0.0, dx0, y0);
    out.c = dx0;
    for (int j = 0; j < kNumStates; ++j) {
        StateVec e = StateVec::Zero();
        e[j] = 1.0;
        StateVec dx;
        OutputVec y;
        mna_rhs(s, mode, e, 0.0, dx, y);
        out.A.col(j) = dx - dx0;
        out.C_out.col(j) = y - y0;
    }
    StateVec dxv;
    OutputVec yv;
    mna_rhs(s, mode, StateVec::Zero(), 1.0, dxv, yv);
    out.B = dxv - dx0;
    out.D_out = yv - y0;
    return out;
}

} // namespace testsupport
