#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bhd/errors.hpp"
#include "bhd/feedback.hpp"
#include "bhd/lindblad.hpp"
#include "bhd/rng.hpp"
#include "bhd/trajectory.hpp"

namespace bhd {

struct DetectionConfig {
    double eta = 1.0; // detected fraction, shared by both detectors

    void validate() const {
        if (!(eta >= 0.0) || !(eta <= 1.0))
            throw ArgumentError("DetectionConfig: eta must lie in [0, 1]");
    }
};

// Conditioned density-matrix trajectory for detection efficiency eta.
// Between clicks the state evolves by the measurement-operator update
//   rho' = M0 rho M0^+ + (1-eta) gamma dt sum_j a_j rho a_j^+,
//   M0 = 1 - dt ( iH(f) + (gamma/2) sum_j a_j^+ a_j ),
// followed by symmetrization and trace renormalization; expanding in dt
// reproduces the unitary part, the undetected dissipator and the no-click
// back-action to first order, while keeping rho positive and preserving
// purity exactly at eta = 1. Detected clicks fire with probability
// eta*gamma*Tr(a_j rho a_j^+)*dt and apply rho -> a_j rho a_j^+ / Tr.
//
// Shares DimerTables with the pure-state engine (the bands already carry
// dt); the same active-window bookkeeping runs on the diagonal marginals.
class DmPropagator {
public:
    explicit DmPropagator(const DimerTables& tables)
        : t_(tables),
          levels_(tables.basis().levels()),
          dim_(tables.basis().dim()),
          pad_(levels_ + 1) {
        rho_ = DensityMatrix::Zero(dim_, dim_);
        work_b_ = DensityMatrix::Zero(dim_, dim_);
        work_c_ = DensityMatrix::Zero(dim_, dim_);
        col_in_.assign(dim_ + 2 * pad_, cplx(0.0, 0.0));
        row_mass_.assign(levels_, 0.0);
        col_mass_.assign(levels_, 0.0);
        reset();
    }

    void reset() {
        rho_.setZero();
        rho_(0, 0) = 1.0;
        std::fill(col_in_.begin(), col_in_.end(), cplx(0.0, 0.0));
        n1_ = n2_ = 0.0;
        std::fill(row_mass_.begin(), row_mass_.end(), 0.0);
        std::fill(col_mass_.begin(), col_mass_.end(), 0.0);
        row_mass_[0] = col_mass_[0] = 1.0;
        w1_ = w2_ = std::min(2, levels_);
    }

    void set_state(const DensityMatrix& rho) {
        if (rho.rows() != dim_ || rho.cols() != dim_)
            throw ArgumentError("DmPropagator: dimension mismatch");
        const double tr = rho.trace().real();
        if (std::abs(tr - 1.0) > 1e-8)
            throw ContractViolation("DmPropagator: trace must be 1");
        rho_ = rho;
        refresh_window_full();
        // The engine's invariant is that rho is exactly zero outside the
        // active block; clip the (sub-floor) remainder and renormalize.
        const int L = levels_;
        for (int r = 0; r < dim_; ++r)
            for (int c = 0; c < dim_; ++c)
                if (r / L >= w1_ || r % L >= w2_ || c / L >= w1_ || c % L >= w2_)
                    rho_(r, c) = cplx(0.0, 0.0);
        rho_ /= rho_.trace().real();
        std::fill(col_in_.begin(), col_in_.end(), cplx(0.0, 0.0));
        work_b_.setZero();
        work_c_.setZero();
    }

    const DensityMatrix& state() const { return rho_; }
    double population(int site) const { return site == 1 ? n1_ : n2_; }
    double mass_at_cutoff() const { return row_mass_[levels_ - 1] + col_mass_[levels_ - 1]; }

    StepOutcome step(ControllerState& controller, const FeedbackParams& fb, double eta,
                     RandomStream& rng, bool swap_draws = false, long long step_index = -1) {
        const double dt = t_.dt();
        const double gamma = t_.params().gamma;
        StepOutcome out;
        out.f = apply_feedback(raw_feedback(n1_, n2_, fb), controller, dt, fb);

        const double p1 = eta * gamma * n1_ * dt;
        const double p2 = eta * gamma * n2_ * dt;
        if (p1 >= 0.1 || p2 >= 0.1)
            throw StepSizeError("detected-jump probability >= 0.1 at step " +
                                std::to_string(step_index) + "; reduce dt");
        const double ua = rng.uniform();
        const double ub = rng.uniform();
        const int first = swap_draws ? 2 : 1;
        const int second = swap_draws ? 1 : 2;
        const double p_first = (first == 1) ? p1 : p2;
        const double p_second = (second == 1) ? p1 : p2;
        if (ua < p_first) {
            apply_click(first, step_index);
            (first == 1 ? out.jumped1 : out.jumped2) = true;
        } else if (ub < p_second) {
            apply_click(second, step_index);
            (second == 1 ? out.jumped1 : out.jumped2) = true;
        } else {
            no_click_update(out.f, eta, step_index);
        }
        return out;
    }

private:
    static constexpr double kMassFloor = 1e-30;

    // out_col = M0 * in_col restricted to the active window; in_col is the
    // padded scratch so band reads off the window see zeros.
    void m0_column(const double f, const cplx* in, cplx* out_col) const {
        const int L = levels_;
        for (int r = 0; r < w1_; ++r) {
            const int base = r * L;
            for (int c = 0; c < w2_; ++c) {
                const int i = base + c;
                const cplx hop = t_.hop_up_[i] * in[i - L + 1] + t_.hop_down_[i] * in[i + L - 1];
                const cplx drv1 = t_.a1_band_[i] * in[i + L] + t_.a1dag_band_[i] * in[i - L];
                const cplx drv2 = t_.a2_band_[i] * in[i + 1] + t_.a2dag_band_[i] * in[i - 1];
                const cplx drv = f * (drv1 + drv2);
                const double dr = t_.drift_diag_[i].real();
                const double di = t_.drift_diag_[i].imag();
                out_col[i] =
                    cplx(dr * in[i].real() - di * in[i].imag() - hop.imag() + drv.imag(),
                         dr * in[i].imag() + di * in[i].real() + hop.real() - drv.real());
            }
        }
    }

    // B = M0 * A over active columns (A, B full-dim matrices).
    void m0_times(const double f, const DensityMatrix& a, DensityMatrix& b) {
        const int L = levels_;
        cplx* scratch = col_in_.data() + pad_;
        for (int r = 0; r < w1_; ++r) {
            for (int c = 0; c < w2_; ++c) {
                const int col = r * L + c;
                const auto src = a.col(col);
                for (int rr = 0; rr < w1_; ++rr)
                    for (int cc = 0; cc < w2_; ++cc) scratch[rr * L + cc] = src[rr * L + cc];
                m0_column(f, scratch, b.col(col).data());
            }
        }
    }

    void no_click_update(double f, double eta, long long step_index) {
        const int L = levels_;
        const double dt = t_.dt();
        const double gamma = t_.params().gamma;

        m0_times(f, rho_, work_b_);
        adjoint_active(work_b_, work_c_);
        m0_times(f, work_c_, work_b_); // work_b_ = M0 (M0 rho)^+  => result^+
        const double feed = (1.0 - eta) * gamma * dt;
        // rho' = work_b_^+ + feed * sum_j a_j rho a_j^+ on the active block.
        double trace = 0.0;
        for (int r1 = 0; r1 < w1_; ++r1) {
            for (int r2 = 0; r2 < w2_; ++r2) {
                const int r = r1 * L + r2;
                for (int c1 = 0; c1 < w1_; ++c1) {
                    for (int c2 = 0; c2 < w2_; ++c2) {
                        const int c = c1 * L + c2;
                        cplx v = std::conj(work_b_(c, r));
                        if (feed != 0.0) {
                            cplx gain(0.0, 0.0);
                            if (r1 + 1 < w1_ && c1 + 1 < w1_)
                                gain += std::sqrt(double(r1 + 1) * (c1 + 1)) * rho_(r + L, c + L);
                            if (r2 + 1 < w2_ && c2 + 1 < w2_)
                                gain += std::sqrt(double(r2 + 1) * (c2 + 1)) * rho_(r + 1, c + 1);
                            v += feed * gain;
                        }
                        work_c_(r, c) = v;
                    }
                }
                trace += work_c_(r, r).real();
            }
        }
        finish(work_c_, trace, step_index);
    }

    void apply_click(int site, long long step_index) {
        const int L = levels_;
        const int off = (site == 1) ? L : 1;
        double trace = 0.0;
        for (int r1 = 0; r1 < w1_; ++r1) {
            for (int r2 = 0; r2 < w2_; ++r2) {
                const int r = r1 * L + r2;
                const double ar = (site == 1) ? ((r1 + 1 < w1_) ? std::sqrt(double(r1 + 1)) : 0.0)
                                              : ((r2 + 1 < w2_) ? std::sqrt(double(r2 + 1)) : 0.0);
                for (int c1 = 0; c1 < w1_; ++c1) {
                    for (int c2 = 0; c2 < w2_; ++c2) {
                        const int c = c1 * L + c2;
                        const double ac = (site == 1)
                                              ? ((c1 + 1 < w1_) ? std::sqrt(double(c1 + 1)) : 0.0)
                                              : ((c2 + 1 < w2_) ? std::sqrt(double(c2 + 1)) : 0.0);
                        work_c_(r, c) = (ar * ac != 0.0) ? ar * ac * rho_(r + off, c + off)
                                                         : cplx(0.0, 0.0);
                    }
                }
                trace += work_c_(r, r).real();
            }
        }
        if (!(trace > 1e-300))
            throw NumericalError("click from zero-weight state at step " +
                                 std::to_string(step_index));
        finish(work_c_, trace, step_index);
    }

    void adjoint_active(const DensityMatrix& a, DensityMatrix& out) const {
        const int L = levels_;
        for (int r1 = 0; r1 < w1_; ++r1)
            for (int r2 = 0; r2 < w2_; ++r2) {
                const int r = r1 * L + r2;
                for (int c1 = 0; c1 < w1_; ++c1)
                    for (int c2 = 0; c2 < w2_; ++c2) {
                        const int c = c1 * L + c2;
                        out(r, c) = std::conj(a(c, r));
                    }
            }
    }

    void finish(DensityMatrix& next, double trace, long long step_index) {
        if (!std::isfinite(trace) || !(trace > 0.0))
            throw BlowupError("non-finite density matrix at step " + std::to_string(step_index));
        const int L = levels_;
        const double inv = 1.0 / trace;
        std::fill(row_mass_.begin(), row_mass_.end(), 0.0);
        std::fill(col_mass_.begin(), col_mass_.end(), 0.0);
        double s1 = 0.0, s2 = 0.0;
        // Symmetrize and renormalize the active block in place.
        for (int r1 = 0; r1 < w1_; ++r1) {
            for (int r2 = 0; r2 < w2_; ++r2) {
                const int r = r1 * L + r2;
                for (int c1 = r1; c1 < w1_; ++c1) {
                    for (int c2 = 0; c2 < w2_; ++c2) {
                        const int c = c1 * L + c2;
                        if (c < r) continue;
                        const cplx v = 0.5 * inv * (next(r, c) + std::conj(next(c, r)));
                        rho_(r, c) = v;
                        rho_(c, r) = std::conj(v);
                    }
                }
                const double p = rho_(r, r).real();
                row_mass_[r1] += p;
                col_mass_[r2] += p;
            }
        }
        for (int k = 0; k < levels_; ++k) {
            s1 += k * row_mass_[k];
            s2 += k * col_mass_[k];
        }
        n1_ = s1;
        n2_ = s2;
        if (w1_ < levels_ && row_mass_[w1_ - 1] > kMassFloor) ++w1_;
        if (w2_ < levels_ && col_mass_[w2_ - 1] > kMassFloor) ++w2_;
    }

    void refresh_window_full() {
        std::fill(row_mass_.begin(), row_mass_.end(), 0.0);
        std::fill(col_mass_.begin(), col_mass_.end(), 0.0);
        const int L = levels_;
        double s1 = 0.0, s2 = 0.0;
        for (int i = 0; i < dim_; ++i) {
            const double p = rho_(i, i).real();
            row_mass_[i / L] += p;
            col_mass_[i % L] += p;
        }
        for (int k = 0; k < levels_; ++k) {
            s1 += k * row_mass_[k];
            s2 += k * col_mass_[k];
        }
        n1_ = s1;
        n2_ = s2;
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
    DensityMatrix rho_, work_b_, work_c_;
    std::vector<cplx> col_in_;
    std::vector<double> row_mass_, col_mass_;
    double n1_ = 0.0, n2_ = 0.0;
    int w1_ = 2, w2_ = 2;
};

// Conditioned trajectory with the same record layout as the pure-state
// engine; jump events here are detected clicks only.
inline TrajectoryResult run_dm_trajectory(const DimerTables& tables, const TrajectoryConfig& cfg,
                                          double eta, std::uint64_t stream_seed) {
    cfg.validate();
    DetectionConfig{eta}.validate();
    const long long steps = cfg.n_steps();
    const int stride = cfg.record_stride;

    DmPropagator prop(tables);
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
        const StepOutcome out = prop.step(controller, cfg.feedback, eta, rng,
                                          cfg.swap_jump_draws, k);
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

} // namespace bhd
