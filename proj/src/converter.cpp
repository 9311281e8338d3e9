#include "bucksmc/converter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bucksmc {

namespace {

constexpr double kStateLimit = 1e9;

bool finite(double v) { return std::isfinite(v); }

[[noreturn]] void spec_fail(const std::string& field, const std::string& what) {
    throw SpecError("ConverterSpec: " + field + " " + what);
}

void check_nonneg(double v, const char* name) {
    if (!finite(v) || v < 0.0) spec_fail(name, "must be finite and >= 0");
}

void check_pos(double v, const char* name) {
    if (!finite(v) || v <= 0.0) spec_fail(name, "must be finite and > 0");
}

enum class Mode { On, OffDiode, OffBlocking };

// Solves the output node network for given capacitor voltages and injected
// inductor current. Unknowns: v_C, i_C1, i_C2, i_load with
//   v_C - R_c1 i_C1 = v_C1
//   v_C - R_c2 i_C2 = v_C2
//   i_C1 + i_C2 + i_load = i_in
//   v_C - R_load i_load = 0
// With both ESRs exactly zero the system loses rank; the two capacitors are
// then hard-paralleled and the current splits by capacitance ratio.
struct OutputSolution {
    double v_C, i_C1, i_C2, i_load;
};

OutputSolution solve_output_network(const ConverterSpec& s, double r_load,
                                    double v_C1, double v_C2, double i_in) {
    if (s.R_c1 == 0.0 && s.R_c2 == 0.0) {
        if (r_load <= 0.0)
            throw DegenerateTopologyError(
                "output network singular: zero load with zero capacitor ESRs");
        const double c_tot = s.C_1 + s.C_2;
        const double v_C = (s.C_1 * v_C1 + s.C_2 * v_C2) / c_tot;
        const double i_load = v_C / r_load;
        const double i_net = i_in - i_load;
        return {v_C, s.C_1 / c_tot * i_net, s.C_2 / c_tot * i_net, i_load};
    }

    Eigen::Matrix4d m;
    m << 1.0, -s.R_c1, 0.0, 0.0,
         1.0, 0.0, -s.R_c2, 0.0,
         0.0, 1.0, 1.0, 1.0,
         1.0, 0.0, 0.0, -r_load;
    Eigen::Vector4d rhs(v_C1, v_C2, i_in, 0.0);

    Eigen::FullPivLU<Eigen::Matrix4d> lu(m);
    if (!lu.isInvertible())
        throw DegenerateTopologyError("output network singular for the given ESR/load values");
    Eigen::Vector4d u = lu.solve(rhs);
    return {u[0], u[1], u[2], u[3]};
}

struct RhsResult {
    StateVec dxdt;
    OutputVec y;
};

// Direct Kirchhoff evaluation of one conduction mode. Exactly affine in
// (x, vin); build_state_space extracts the matrices from it.
RhsResult eval_mode_rhs(const ConverterSpec& s, double r_load, Mode mode,
                        const StateVec& x, double vin) {
    const bool switch_on = (mode == Mode::On);
    const double i_sw = switch_on ? x[kIL] : 0.0;
    const double v_A = x[kVCin] + s.R_cin * (x[kILs] - i_sw);

    const OutputSolution out =
        solve_output_network(s, r_load, x[kVC1], x[kVC2], x[kIL]);

    RhsResult r;
    r.dxdt[kILs] = (vin - s.R_s * x[kILs] - v_A) / s.L_s;
    r.dxdt[kVCin] = (x[kILs] - i_sw) / s.C_in;
    switch (mode) {
    case Mode::On:
        r.dxdt[kIL] = (v_A - (s.R_M + s.R_L) * x[kIL] - out.v_C) / s.L;
        break;
    case Mode::OffDiode:
        r.dxdt[kIL] = (-s.V_d - s.R_L * x[kIL] - out.v_C) / s.L;
        break;
    case Mode::OffBlocking:
        r.dxdt[kIL] = 0.0;
        break;
    }
    r.dxdt[kVC1] = out.i_C1 / s.C_1;
    r.dxdt[kVC2] = out.i_C2 / s.C_2;
    r.y << out.v_C, out.i_load;
    return r;
}

StateSpaceModel extract_model(const ConverterSpec& s, double r_load, Mode mode) {
    StateSpaceModel m;
    const RhsResult base = eval_mode_rhs(s, r_load, mode, StateVec::Zero(), 0.0);
    m.c = base.dxdt;
    for (int j = 0; j < kNumStates; ++j) {
        StateVec e = StateVec::Zero();
        e[j] = 1.0;
        const RhsResult r = eval_mode_rhs(s, r_load, mode, e, 0.0);
        m.A.col(j) = r.dxdt - base.dxdt;
        m.C_out.col(j) = r.y - base.y;
    }
    const RhsResult rin = eval_mode_rhs(s, r_load, mode, StateVec::Zero(), 1.0);
    m.B = rin.dxdt - base.dxdt;
    m.D_out = rin.y - base.y;
    return m;
}

// Conduction-mode matrices with the constant input term folded in.
struct Affine {
    StateMat A;
    StateVec b; // B * V_in + c
    OutputMat C;
    OutputVec d; // D_out * V_in
};

Affine make_affine(const StateSpaceModel& m, double v_in) {
    return {m.A, m.B * v_in + m.c, m.C_out, m.D_out * v_in};
}

struct ModeModels {
    Affine on, off_diode, off_block;
};

ModeModels build_models(const ConverterSpec& s, double r_load) {
    return {make_affine(extract_model(s, r_load, Mode::On), s.V_in),
            make_affine(extract_model(s, r_load, Mode::OffDiode), s.V_in),
            make_affine(extract_model(s, r_load, Mode::OffBlocking), s.V_in)};
}

// Fixed-step integrator for the switched system. Segment boundaries land
// exactly on PWM edges and the load-step instant; the diode turn-off inside
// an off-interval is located by linear interpolation of i_L.
class Engine {
public:
    Engine(const ConverterSpec& spec, bool want_trace)
        : spec_(spec), trace_enabled_(want_trace) {
        pre_ = build_models(spec, spec.R_load);
        if (spec.load_step) {
            ConverterSpec post = spec;
            post.R_load = spec.load_step->R_load;
            post_ = build_models(post, post.R_load);
        }
        models_ = &pre_;
        h_max_ = 1.0 / (spec.f_sw * spec.steps_per_period);
        n_samples_ = static_cast<std::size_t>(std::floor(spec.t_end * spec.sample_rate + 1e-9)) + 1;
    }

    void run() {
        x_.setZero();
        record_point(0.0);

        const double t_per = 1.0 / spec_.f_sw;
        const double tiny = 1e-12 * std::max(1.0, spec_.t_end);
        for (std::size_t p = 0;; ++p) {
            const double t0 = static_cast<double>(p) * t_per;
            if (t0 >= spec_.t_end - tiny) break;
            const double t_edge = std::min(t0 + spec_.D * t_per, spec_.t_end);
            run_segment(true, t0, t_edge);
            if (t_edge >= spec_.t_end - tiny) break;
            const double t1 = std::min(static_cast<double>(p + 1) * t_per, spec_.t_end);
            run_segment(false, t_edge, t1);
        }
        flush_samples();
    }

    Waveform take_waveform() { return std::move(wave_); }
    SimulationTrace take_trace() { return std::move(trace_); }

private:
    void apply_load_step() {
        models_ = &post_;
        load_applied_ = true;
    }

    void run_segment(bool on_intent, double ta, double tb) {
        const double tiny = 1e-12 * std::max(1.0, tb);
        if (tb - ta <= tiny) return;
        const double te = spec_.load_step ? spec_.load_step->time
                                          : std::numeric_limits<double>::infinity();
        if (spec_.load_step && !load_applied_ && te <= ta + tiny) apply_load_step();
        if (spec_.load_step && !load_applied_ && te > ta + tiny && te < tb - tiny) {
            run_plain(on_intent, ta, te);
            apply_load_step();
            run_plain(on_intent, te, tb);
        } else {
            run_plain(on_intent, ta, tb);
        }
    }

    void run_plain(bool on_intent, double ta, double tb) {
        if (!on_intent) {
            if (x_[kIL] <= 0.0) {
                x_[kIL] = 0.0; // diode blocks: inductor current clamps to zero
                integrate(models_->off_block, ta, tb, false);
                return;
            }
            integrate(models_->off_diode, ta, tb, true);
            return;
        }
        integrate(models_->on, ta, tb, false);
    }

    // Integrates [ta, tb] with uniform steps <= h_max. With watch_diode set,
    // an i_L zero crossing ends the step early and the remainder of the
    // interval continues in the blocking mode.
    void integrate(const Affine& m, double ta, double tb, bool watch_diode) {
        const int n = std::max(1, static_cast<int>(std::ceil((tb - ta) / h_max_ - 1e-9)));
        const double h = (tb - ta) / n;
        for (int i = 0; i < n; ++i) {
            const double t_from = ta + i * h;
            const double t_to = (i + 1 == n) ? tb : ta + (i + 1) * h;
            const StateVec x_prev = x_;
            rk4_step(m, t_to - t_from);
            if (watch_diode && x_[kIL] < 0.0) {
                const double a = x_prev[kIL];
                const double b = x_[kIL];
                double theta = a / (a - b);
                theta = std::clamp(theta, 0.0, 1.0);
                const double t_cross = t_from + theta * (t_to - t_from);
                x_ = x_prev;
                if (theta > 0.0) rk4_step(m, t_cross - t_from);
                x_[kIL] = 0.0;
                record_point(t_cross);
                integrate(models_->off_block, t_cross, tb, false);
                return;
            }
            record_point(t_to);
        }
    }

    void rk4_step(const Affine& m, double h) {
        const StateVec k1 = m.A * x_ + m.b;
        const StateVec k2 = m.A * (x_ + 0.5 * h * k1) + m.b;
        const StateVec k3 = m.A * (x_ + 0.5 * h * k2) + m.b;
        const StateVec k4 = m.A * (x_ + h * k3) + m.b;
        x_ += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    void record_point(double t) {
        if (!x_.allFinite() || x_.cwiseAbs().maxCoeff() > kStateLimit) {
            std::ostringstream os;
            os << "simulation diverged at t = " << t << " s";
            throw DivergenceError(os.str(), t);
        }
        const OutputVec y = models_->on.C * x_ + models_->on.d;
        capture_samples(t, y);
        if (trace_enabled_) {
            trace_.states.push_back(
                {x_[kILs], x_[kVCin], x_[kIL], x_[kVC1], x_[kVC2], t});
            trace_.V_out.push_back(y[0]);
            trace_.I_out.push_back(y[1]);
        }
        t_grid_ = t;
        y_grid_ = y;
        have_prev_ = true;
    }

    // Nearest-grid-point sample-and-hold at the measurement rate.
    void capture_samples(double t_new, const OutputVec& y_new) {
        if (!have_prev_) return; // first grid point becomes prev below
        const double tiny = 1e-12 * std::max(1.0, spec_.t_end);
        while (next_sample_ < n_samples_) {
            const double ts = static_cast<double>(next_sample_) / spec_.sample_rate;
            if (ts > t_new + tiny) break;
            const bool use_prev = (ts - t_grid_) <= (t_new - ts);
            push_sample(ts, use_prev ? y_grid_ : y_new);
            ++next_sample_;
        }
    }

    void flush_samples() {
        while (next_sample_ < n_samples_) {
            const double ts = static_cast<double>(next_sample_) / spec_.sample_rate;
            push_sample(ts, y_grid_);
            ++next_sample_;
        }
    }

    void push_sample(double ts, const OutputVec& y) {
        wave_.t.push_back(ts);
        wave_.V_out.push_back(y[0]);
        wave_.I_out.push_back(y[1]);
    }

    const ConverterSpec& spec_;
    bool trace_enabled_;
    ModeModels pre_, post_;
    const ModeModels* models_;
    bool load_applied_ = false;
    double h_max_;
    std::size_t n_samples_;
    std::size_t next_sample_ = 0;

    StateVec x_ = StateVec::Zero();
    double t_grid_ = 0.0;
    OutputVec y_grid_ = OutputVec::Zero();
    bool have_prev_ = false;

    Waveform wave_;
    SimulationTrace trace_;
};

} // namespace

void ConverterSpec::validate() const {
    check_pos(V_in, "V_in");
    if (!finite(D) || D <= 0.0 || D >= 1.0) spec_fail("D", "must lie strictly in (0, 1)");
    check_pos(f_sw, "f_sw");
    check_pos(L, "L");
    check_nonneg(R_L, "R_L");
    check_nonneg(R_M, "R_M");
    check_nonneg(V_d, "V_d");
    // The five-state model needs a strictly positive source inductance; use a
    // small value to approximate a stiff source.
    check_pos(L_s, "L_s");
    check_nonneg(R_s, "R_s");
    check_pos(C_in, "C_in");
    check_nonneg(R_cin, "R_cin");
    check_pos(C_1, "C_1");
    check_nonneg(R_c1, "R_c1");
    check_pos(C_2, "C_2");
    check_nonneg(R_c2, "R_c2");
    check_pos(R_load, "R_load");
    if (load_step) {
        if (!finite(load_step->time) || load_step->time < 0.0)
            spec_fail("load_step.time", "must be finite and >= 0");
        if (!finite(load_step->R_load) || load_step->R_load <= 0.0)
            spec_fail("load_step.R_load", "must be finite and > 0");
    }
    check_pos(t_end, "t_end");
    if (steps_per_period < 20) spec_fail("steps_per_period", "must be >= 20");
    check_pos(sample_rate, "sample_rate");
    if (sample_rate > f_sw * steps_per_period * (1.0 + 1e-12))
        spec_fail("sample_rate", "must not exceed f_sw * steps_per_period");
}

StateSpaceModel build_state_space(const ConverterSpec& spec, bool switch_on,
                                  bool diode_conducting) {
    if (switch_on && diode_conducting)
        throw std::invalid_argument(
            "build_state_space: MOSFET on forces the diode off");
    const Mode mode = switch_on ? Mode::On
                                : (diode_conducting ? Mode::OffDiode : Mode::OffBlocking);
    return extract_model(spec, spec.R_load, mode);
}

Waveform simulate(const ConverterSpec& spec) {
    spec.validate();
    Engine e(spec, false);
    e.run();
    return e.take_waveform();
}

SimulationTrace simulate_trace(const ConverterSpec& spec) {
    spec.validate();
    Engine e(spec, true);
    e.run();
    return e.take_trace();
}

Waveform steady_state_window(const Waveform& w, double fraction) {
    if (w.empty()) throw SpecError("steady_state_window: empty waveform");
    if (!(fraction > 0.0) || fraction > 1.0)
        throw SpecError("steady_state_window: fraction must lie in (0, 1]");
    const std::size_t k = w.size();
    const std::size_t n =
        std::min<std::size_t>(k, static_cast<std::size_t>(std::ceil(fraction * k - 1e-12)));
    const std::size_t first = k - n;
    Waveform out;
    out.t.reserve(n);
    out.V_out.assign(w.V_out.begin() + first, w.V_out.end());
    out.I_out.assign(w.I_out.begin() + first, w.I_out.end());
    const double t0 = w.t[first];
    for (std::size_t i = first; i < k; ++i) out.t.push_back(w.t[i] - t0);
    return out;
}

} // namespace bucksmc
