#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "bhd/errors.hpp"
#include "bhd/feedback.hpp"
#include "bhd/fock.hpp"
#include "bhd/rng.hpp"

namespace bhd {

struct TrajectoryConfig {
    SystemParams system;
    BasisSpec basis;
    FeedbackParams feedback;
    double dt = 1e-3;        // units of 1/gamma
    double t_final = 200.0;  // units of 1/gamma
    std::uint64_t seed = 0;
    int record_stride = 10;
    // Relabels which site consumes which uniform draw (and the tie-break
    // order); together with c_a -> -c_a this realizes the exact mirror
    // trajectory. Used by parity tests.
    bool swap_jump_draws = false;

    void validate() const {
        system.validate();
        feedback.validate();
        if (!(dt > 0.0) || dt > 1e-2)
            throw ArgumentError("TrajectoryConfig: need 0 < dt <= 1e-2");
        if (!(t_final > 0.0)) throw ArgumentError("TrajectoryConfig: t_final must be positive");
        if (record_stride < 1) throw ArgumentError("TrajectoryConfig: record_stride must be >= 1");
        const auto steps = static_cast<long long>(std::llround(t_final / dt));
        if (steps < 1 || std::abs(steps * dt - t_final) > 1e-9 * std::max(1.0, t_final))
            throw ArgumentError("TrajectoryConfig: t_final must be an integer multiple of dt");
        if (steps % record_stride != 0)
            throw ArgumentError("TrajectoryConfig: step count must be divisible by record_stride");
    }

    long long n_steps() const { return std::llround(t_final / dt); }
};

struct JumpEvent {
    double time;
    int site; // 1 or 2
};

struct JumpRecord {
    std::vector<JumpEvent> events; // strictly time-ordered
};

struct TrajectoryResult {
    std::vector<double> times;
    std::vector<double> n1;
    std::vector<double> n2;
    std::vector<double> f;
    JumpRecord jumps;
    // Truncation-adequacy monitor: step-averaged and peak populations.
    double mean_n1 = 0.0;
    double mean_n2 = 0.0;
    double mean_f = 0.0;
    double max_population = 0.0;
    double max_cutoff_mass = 0.0;
    bool truncation_warning = false;
};

// Precomputed coefficient bands for the two-mode kernel. The drift matrix
// splits into a static part and f times the drive part; both live on
// diagonal-offset bands over the (n1, n2) grid with dt folded in, so one
// step costs one fused pass. Immutable and shareable across workers.
class DimerTables {
public:
    DimerTables(const SystemParams& params, const BasisSpec& basis, double dt)
        : params_(params), basis_(basis), dt_(dt) {
        params.validate();
        const int levels = basis.levels();
        const int dim = basis.dim();
        drift_diag_.resize(dim);
        hop_up_.assign(dim, 0.0);
        hop_down_.assign(dim, 0.0);
        a1_band_.assign(dim, 0.0);
        a1dag_band_.assign(dim, 0.0);
        a2_band_.assign(dim, 0.0);
        a2dag_band_.assign(dim, 0.0);
        jump1_band_.assign(dim, 0.0);
        jump2_band_.assign(dim, 0.0);
        for (int n1 = 0; n1 < levels; ++n1) {
            for (int n2 = 0; n2 < levels; ++n2) {
                const int i = basis.index(n1, n2);
                const double h_diag =
                    params.delta * (n1 + n2) +
                    0.5 * params.u * (double(n1) * (n1 - 1) + double(n2) * (n2 - 1));
                // 1 + dt*(-i h_diag - (gamma/2)(n1+n2)); the state-dependent
                // (gamma/2) n_tot scalar is added per step.
                drift_diag_[i] = cplx(1.0 - dt * 0.5 * params.gamma * (n1 + n2), -dt * h_diag);
                // a1^+ a2 pulls from (n1-1, n2+1); a2^+ a1 from (n1+1, n2-1).
                if (n1 >= 1 && n2 < levels - 1)
                    hop_up_[i] = params.j * dt * std::sqrt(double(n1) * (n2 + 1));
                if (n2 >= 1 && n1 < levels - 1)
                    hop_down_[i] = params.j * dt * std::sqrt(double(n2) * (n1 + 1));
                const double drv = params.omega * dt;
                if (n1 < levels - 1) {
                    a1_band_[i] = drv * std::sqrt(double(n1 + 1)); // pulls from (n1+1, n2)
                    jump1_band_[i] = std::sqrt(double(n1 + 1));
                }
                if (n1 >= 1) a1dag_band_[i] = drv * std::sqrt(double(n1)); // from (n1-1, n2)
                if (n2 < levels - 1) {
                    a2_band_[i] = drv * std::sqrt(double(n2 + 1)); // from (n1, n2+1)
                    jump2_band_[i] = std::sqrt(double(n2 + 1));
                }
                if (n2 >= 1) a2dag_band_[i] = drv * std::sqrt(double(n2)); // from (n1, n2-1)
            }
        }
    }

    const SystemParams& params() const { return params_; }
    const BasisSpec& basis() const { return basis_; }
    double dt() const { return dt_; }

private:
    friend class SsePropagator;
    friend class DmPropagator;
    SystemParams params_;
    BasisSpec basis_;
    double dt_;
    std::vector<cplx> drift_diag_;
    std::vector<double> hop_up_, hop_down_;
    std::vector<double> a1_band_, a1dag_band_, a2_band_, a2dag_band_;
    std::vector<double> jump1_band_, jump2_band_;
};

struct StepOutcome {
    double f = 0.0; // drive value applied during the step
    bool jumped1 = false;
    bool jumped2 = false;
};

// Single quantum-jump trajectory engine. Owns the state between steps and
// keeps an active window over the occupied (n1, n2) rectangle so step cost
// scales with the populated support rather than the full truncated basis.
// Amplitudes outside the window are exactly zero; the window keeps one empty
// margin row/column ahead of any mass above kMassFloor and shrinks with
// hysteresis once the support retreats.
//
// Renormalization is deferred: buffers hold the raw pass output and the
// 1/norm factor is folded into the next pass, so each step is one fused
// sweep over the window.
class SsePropagator {
public:
    explicit SsePropagator(const DimerTables& tables)
        : t_(tables),
          levels_(tables.basis().levels()),
          dim_(tables.basis().dim()),
          pad_(levels_ + 1) {
        buf_a_.assign(dim_ + 2 * pad_, cplx(0.0, 0.0));
        buf_b_.assign(dim_ + 2 * pad_, cplx(0.0, 0.0));
        row_mass_.assign(levels_, 0.0);
        col_mass_.assign(levels_, 0.0);
        col_acc_.assign(levels_, 0.0);
        reset();
    }

    // Start from |0,0>.
    void reset() {
        std::fill(buf_a_.begin(), buf_a_.end(), cplx(0.0, 0.0));
        std::fill(buf_b_.begin(), buf_b_.end(), cplx(0.0, 0.0));
        cur_ = buf_a_.data() + pad_;
        nxt_ = buf_b_.data() + pad_;
        cur_[0] = 1.0;
        std::fill(row_mass_.begin(), row_mass_.end(), 0.0);
        std::fill(col_mass_.begin(), col_mass_.end(), 0.0);
        row_mass_[0] = col_mass_[0] = 1.0;
        inv_norm_ = 1.0;
        n1_ = n2_ = 0.0;
        w1_ = w2_ = std::min(2, levels_);
    }

    void set_state(const StateVector& psi) {
        if (psi.size() != dim_) throw ArgumentError("SsePropagator: state dimension mismatch");
        std::fill(buf_a_.begin(), buf_a_.end(), cplx(0.0, 0.0));
        std::fill(buf_b_.begin(), buf_b_.end(), cplx(0.0, 0.0));
        cur_ = buf_a_.data() + pad_;
        nxt_ = buf_b_.data() + pad_;
        for (int i = 0; i < dim_; ++i) cur_[i] = psi[i];
        double norm2 = refresh_masses_full();
        if (std::abs(std::sqrt(norm2) - 1.0) > 1e-6)
            throw ContractViolation("SsePropagator: state is not normalized");
        inv_norm_ = 1.0 / std::sqrt(norm2);
        shrink_window_to_support();
    }

    StateVector state() const {
        StateVector psi = StateVector::Zero(dim_);
        for (int i = 0; i < dim_; ++i) psi[i] = inv_norm_ * cur_[i];
        return psi;
    }

    double population(int site) const { return site == 1 ? n1_ : n2_; }
    double mass_at_cutoff() const { return row_mass_[levels_ - 1] + col_mass_[levels_ - 1]; }
    int window1() const { return w1_; }
    int window2() const { return w2_; }

    // One first-order step: evaluate the drive, then either a photodetection
    // jump (probability gamma*n_j*dt per site, at most one jump per step) or
    // the renormalized no-jump drift.
    StepOutcome step(ControllerState& controller, const FeedbackParams& fb, RandomStream& rng,
                     bool swap_draws = false, long long step_index = -1) {
        const double dt = t_.dt_;
        const double gamma = t_.params_.gamma;
        StepOutcome out;
        out.f = apply_feedback(raw_feedback(n1_, n2_, fb), controller, dt, fb);

        const double p1 = gamma * n1_ * dt;
        const double p2 = gamma * n2_ * dt;
        if (p1 >= 0.1 || p2 >= 0.1)
            throw StepSizeError("jump probability >= 0.1 at step " + std::to_string(step_index) +
                                "; reduce dt");
        const double ua = rng.uniform();
        const double ub = rng.uniform();

        const int first = swap_draws ? 2 : 1;
        const int second = swap_draws ? 1 : 2;
        const double p_first = (first == 1) ? p1 : p2;
        const double p_second = (second == 1) ? p1 : p2;
        if (ua < p_first) {
            apply_jump(first, step_index);
            (first == 1 ? out.jumped1 : out.jumped2) = true;
        } else if (ub < p_second) {
            apply_jump(second, step_index);
            (second == 1 ? out.jumped1 : out.jumped2) = true;
        } else {
            drift(out.f, step_index);
        }
        return out;
    }

    // Renormalized no-jump update
    //   psi <- N[ psi + dt ((gamma/2) sum_j (n_j - a_j^+ a_j) - i H(f)) psi ],
    // applied to the stored raw buffer with the deferred 1/norm folded in.
    void drift(double f, long long step_index = -1) {
        const int L = levels_;
        const double add = 0.5 * t_.params_.gamma * (n1_ + n2_) * t_.dt_;
        const double scale = inv_norm_;
        const cplx* __restrict in = cur_;
        cplx* __restrict out = nxt_;
        double norm2 = 0.0;
        for (int r = 0; r < w1_; ++r) {
            const int base = r * L;
            double rmass = 0.0;
            for (int c = 0; c < w2_; ++c) {
                const int i = base + c;
                const cplx hop = t_.hop_up_[i] * in[i - L + 1] + t_.hop_down_[i] * in[i + L - 1];
                // Per-site pairs summed commutatively, so relabeling the
                // sites mirrors the arithmetic as well as the physics.
                const cplx drv1 = t_.a1_band_[i] * in[i + L] + t_.a1dag_band_[i] * in[i - L];
                const cplx drv2 = t_.a2_band_[i] * in[i + 1] + t_.a2dag_band_[i] * in[i - 1];
                const cplx drv = f * (drv1 + drv2);
                // -iH contributes +iJ*(hops) and -i f Omega*(drive); J and
                // Omega are folded into the bands.
                const double dr = t_.drift_diag_[i].real() + add;
                const double di = t_.drift_diag_[i].imag();
                const cplx v(
                    scale * (dr * in[i].real() - di * in[i].imag() - hop.imag() + drv.imag()),
                    scale * (dr * in[i].imag() + di * in[i].real() + hop.real() - drv.real()));
                out[i] = v;
                const double w = std::norm(v);
                rmass += w;
                col_acc_[c] += w;
            }
            row_mass_[r] = rmass;
            norm2 += rmass;
        }
        finish_update(norm2, step_index, false);
    }

    // psi <- a_site psi / |a_site psi|.
    void apply_jump(int site, long long step_index = -1) {
        const int L = levels_;
        const cplx* __restrict in = cur_;
        cplx* __restrict out = nxt_;
        const double* __restrict band =
            (site == 1) ? t_.jump1_band_.data() : t_.jump2_band_.data();
        const int off = (site == 1) ? L : 1;
        const double scale = inv_norm_;
        double norm2 = 0.0;
        for (int r = 0; r < w1_; ++r) {
            const int base = r * L;
            double rmass = 0.0;
            for (int c = 0; c < w2_; ++c) {
                const int i = base + c;
                const cplx v = (scale * band[i]) * in[i + off];
                out[i] = v;
                const double w = std::norm(v);
                rmass += w;
                col_acc_[c] += w;
            }
            row_mass_[r] = rmass;
            norm2 += rmass;
        }
        if (!(norm2 > 1e-300))
            throw NumericalError("jump from zero-weight state at step " +
                                 std::to_string(step_index));
        finish_update(norm2, step_index, true);
    }

private:
    static constexpr double kMassFloor = 1e-30;

    void finish_update(double norm2, long long step_index, bool after_jump) {
        if (!std::isfinite(norm2) || !(norm2 > 0.0))
            throw BlowupError("non-finite amplitudes at step " + std::to_string(step_index));
        inv_norm_ = 1.0 / std::sqrt(norm2);
        const double inv2 = inv_norm_ * inv_norm_;
        double s1 = 0.0, s2 = 0.0;
        for (int r = 0; r < w1_; ++r) {
            row_mass_[r] *= inv2;
            s1 += r * row_mass_[r];
        }
        for (int c = 0; c < w2_; ++c) {
            col_mass_[c] = col_acc_[c] * inv2;
            col_acc_[c] = 0.0;
            s2 += c * col_mass_[c];
        }
        std::swap(cur_, nxt_);
        n1_ = s1;
        n2_ = s2;
        // Both buffers stay zero outside the window, so growing simply
        // admits fresh (zero) rows/columns; support spreads at most one
        // level per step. Shrinking waits for three clear levels and zeroes
        // what it drops so the outside-window invariant survives.
        if (w1_ < levels_ && row_mass_[w1_ - 1] > kMassFloor) {
            ++w1_;
            row_mass_[w1_ - 1] = 0.0;
        } else if (after_jump && w1_ > 2 && row_mass_[w1_ - 1] <= kMassFloor &&
                   row_mass_[w1_ - 2] <= kMassFloor && row_mass_[w1_ - 3] <= kMassFloor) {
            drop_row(--w1_);
        }
        if (w2_ < levels_ && col_mass_[w2_ - 1] > kMassFloor) {
            ++w2_;
            col_mass_[w2_ - 1] = 0.0;
        } else if (after_jump && w2_ > 2 && col_mass_[w2_ - 1] <= kMassFloor &&
                   col_mass_[w2_ - 2] <= kMassFloor && col_mass_[w2_ - 3] <= kMassFloor) {
            drop_col(--w2_);
        }
    }

    void drop_row(int r) {
        const int base = r * levels_;
        for (int c = 0; c < levels_; ++c) {
            cur_[base + c] = cplx(0.0, 0.0);
            nxt_[base + c] = cplx(0.0, 0.0);
        }
        row_mass_[r] = 0.0;
    }

    void drop_col(int c) {
        for (int r = 0; r < levels_; ++r) {
            cur_[r * levels_ + c] = cplx(0.0, 0.0);
            nxt_[r * levels_ + c] = cplx(0.0, 0.0);
        }
        col_mass_[c] = 0.0;
    }

    double refresh_masses_full() {
        const int L = levels_;
        std::fill(row_mass_.begin(), row_mass_.end(), 0.0);
        std::fill(col_mass_.begin(), col_mass_.end(), 0.0);
        double norm2 = 0.0;
        double s1 = 0.0, s2 = 0.0;
        for (int r = 0; r < levels_; ++r) {
            for (int c = 0; c < levels_; ++c) {
                const double w = std::norm(cur_[r * L + c]);
                row_mass_[r] += w;
                col_mass_[c] += w;
            }
            norm2 += row_mass_[r];
            s1 += r * row_mass_[r];
        }
        for (int c = 0; c < levels_; ++c) s2 += c * col_mass_[c];
        n1_ = s1 / norm2;
        n2_ = s2 / norm2;
        return norm2;
    }

    void shrink_window_to_support() {
        w1_ = levels_;
        while (w1_ > 2 && row_mass_[w1_ - 1] <= kMassFloor && row_mass_[w1_ - 2] <= kMassFloor)
            --w1_;
        w2_ = levels_;
        while (w2_ > 2 && col_mass_[w2_ - 1] <= kMassFloor && col_mass_[w2_ - 2] <= kMassFloor)
            --w2_;
    }

    const DimerTables& t_;
    int levels_;
    int dim_;
    int pad_;
    std::vector<cplx> buf_a_, buf_b_;
    cplx* cur_ = nullptr;
    cplx* nxt_ = nullptr;
    std::vector<double> row_mass_, col_mass_, col_acc_;
    double inv_norm_ = 1.0;
    double n1_ = 0.0, n2_ = 0.0;
    int w1_ = 2, w2_ = 2;
};

// Full single-trajectory run from vacuum. Deterministic given the stream
// seed; ensembles derive one stream per trajectory index.
inline TrajectoryResult run_trajectory(const DimerTables& tables, const TrajectoryConfig& cfg,
                                       std::uint64_t stream_seed) {
    cfg.validate();
    const long long steps = cfg.n_steps();
    const int stride = cfg.record_stride;

    SsePropagator prop(tables);
    RandomStream rng(stream_seed);
    ControllerState controller = controller_init(0.0, 0.0, cfg.feedback);

    TrajectoryResult res;
    const auto n_records = static_cast<std::size_t>(steps / stride) + 1;
    res.times.reserve(n_records);
    res.n1.reserve(n_records);
    res.n2.reserve(n_records);
    res.f.reserve(n_records);

    const double cutoff_guard = tables.basis().n_max_per_site - 0.5;
    double sum_n1 = 0.0, sum_n2 = 0.0, sum_f = 0.0;
    for (long long k = 0; k < steps; ++k) {
        const double v1 = prop.population(1);
        const double v2 = prop.population(2);
        const StepOutcome out = prop.step(controller, cfg.feedback, rng, cfg.swap_jump_draws, k);
        if (k % stride == 0) {
            res.times.push_back(k * cfg.dt);
            res.n1.push_back(v1);
            res.n2.push_back(v2);
            res.f.push_back(out.f);
            res.max_cutoff_mass = std::max(res.max_cutoff_mass, prop.mass_at_cutoff());
        }
        if (out.jumped1) res.jumps.events.push_back({(k + 1) * cfg.dt, 1});
        if (out.jumped2) res.jumps.events.push_back({(k + 1) * cfg.dt, 2});
        sum_n1 += v1;
        sum_n2 += v2;
        sum_f += out.f;
        res.max_population = std::max({res.max_population, v1, v2});
    }
    // Closing sample at t_final; the controller value is what it would
    // output for the final state.
    ControllerState closing = controller;
    res.times.push_back(steps * cfg.dt);
    res.n1.push_back(prop.population(1));
    res.n2.push_back(prop.population(2));
    res.f.push_back(apply_feedback(raw_feedback(prop.population(1), prop.population(2),
                                                cfg.feedback),
                                   closing, cfg.dt, cfg.feedback));

    res.mean_n1 = sum_n1 / double(steps);
    res.mean_n2 = sum_n2 / double(steps);
    res.mean_f = sum_f / double(steps);
    res.truncation_warning = res.mean_n1 > cutoff_guard || res.mean_n2 > cutoff_guard ||
                             res.max_cutoff_mass > 1e-6;
    return res;
}

inline TrajectoryResult run_trajectory(const TrajectoryConfig& cfg) {
    DimerTables tables(cfg.system, cfg.basis, cfg.dt);
    return run_trajectory(tables, cfg, trajectory_seed(cfg.seed, 0));
}

} // namespace bhd
