#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "bhd/errors.hpp"
#include "bhd/trajectory.hpp"

namespace bhd {

struct StatsConfig {
    double t_i = 0.4;          // transient cut
    double t_f = 200.0;
    int n_subensembles = 10;   // groups for the error estimate
    double hist_bin_width = 0.5; // photons

    void validate() const {
        if (!(t_i >= 0.0) || !(t_i < t_f)) throw ArgumentError("StatsConfig: need 0 <= t_i < t_f");
        if (n_subensembles < 1) throw ArgumentError("StatsConfig: n_subensembles must be >= 1");
        if (!(hist_bin_width > 0.0)) throw ArgumentError("StatsConfig: bin width must be positive");
    }
};

// Everything the ensemble statistics need from one trajectory; ensembles
// reduce to these immediately so full time series never accumulate.
struct TrajectorySummary {
    double integral_diff = 0.0; // integral of n2-n1 over [t_i, t_f]
    double integral_tot = 0.0;  // integral of n1+n2 over [t_i, t_f]
    double duration = 0.0;      // t_f - t_i as realized on the record grid
    std::map<int, long long> hist; // bin index -> sample count, center = index*width
    long long n_hist_samples = 0;
    long long jumps1 = 0;
    long long jumps2 = 0;
    double mean_f = 0.0;
    bool truncation_warning = false;
};

struct HistogramData {
    std::vector<double> centers;
    std::vector<double> probabilities;
    double bin_width = 0.0;
    double mean = 0.0;
};

struct EnsembleStats {
    double a = 0.0;       // N_diff / N_tot
    double n_diff = 0.0;
    double n_tot = 0.0;
    double a_opt = 0.0;   // mean of per-group ratios
    double sigma_a_opt = 0.0;
    std::vector<double> a_j;
    HistogramData p_n_diff;
    long long n_trajectories = 0;
};

// Trapezoidal time integrals and pooled histogram samples on the recorded
// grid, restricted to [t_i, t_f].
inline TrajectorySummary summarize_trajectory(const TrajectoryResult& traj,
                                              const StatsConfig& cfg) {
    cfg.validate();
    const auto& t = traj.times;
    if (t.size() < 2) throw ArgumentError("summarize_trajectory: too few samples");
    const double eps = 1e-9;
    std::size_t i0 = 0;
    while (i0 < t.size() && t[i0] < cfg.t_i - eps) ++i0;
    std::size_t i1 = t.size() - 1;
    while (i1 > 0 && t[i1] > cfg.t_f + eps) --i1;
    if (i1 <= i0)
        throw ArgumentError("summarize_trajectory: record grid does not cover [t_i, t_f]");

    TrajectorySummary s;
    s.duration = t[i1] - t[i0];
    for (std::size_t k = i0; k < i1; ++k) {
        const double h = t[k + 1] - t[k];
        const double d0 = traj.n2[k] - traj.n1[k];
        const double d1 = traj.n2[k + 1] - traj.n1[k + 1];
        const double s0 = traj.n2[k] + traj.n1[k];
        const double s1 = traj.n2[k + 1] + traj.n1[k + 1];
        s.integral_diff += 0.5 * h * (d0 + d1);
        s.integral_tot += 0.5 * h * (s0 + s1);
    }
    for (std::size_t k = i0; k <= i1; ++k) {
        const double diff = traj.n2[k] - traj.n1[k];
        const int bin = static_cast<int>(std::lround(diff / cfg.hist_bin_width));
        ++s.hist[bin];
        ++s.n_hist_samples;
    }
    for (const auto& e : traj.jumps.events) (e.site == 1 ? s.jumps1 : s.jumps2)++;
    s.mean_f = traj.mean_f;
    s.truncation_warning = traj.truncation_warning;
    return s;
}

namespace detail {

inline HistogramData merge_histograms(const std::vector<TrajectorySummary>& summaries,
                                      double bin_width) {
    std::map<int, long long> merged;
    long long total = 0;
    for (const auto& s : summaries) {
        for (const auto& [bin, count] : s.hist) merged[bin] += count;
        total += s.n_hist_samples;
    }
    HistogramData h;
    h.bin_width = bin_width;
    if (total == 0) return h;
    for (const auto& [bin, count] : merged) {
        h.centers.push_back(bin * bin_width);
        h.probabilities.push_back(double(count) / double(total));
        h.mean += h.centers.back() * h.probabilities.back();
    }
    return h;
}

} // namespace detail

// Sub-ensemble asymmetries: trajectories are split into n_groups in index
// order and each group uses the ratio of summed integrals.
inline std::vector<double> subensemble_asymmetries(const std::vector<TrajectorySummary>& summaries,
                                                   int n_groups) {
    const auto n = static_cast<long long>(summaries.size());
    if (n_groups < 1 || n % n_groups != 0)
        throw ArgumentError("subensemble_asymmetries: trajectory count must be divisible by N_a");
    const long long per = n / n_groups;
    std::vector<double> a_j(n_groups);
    for (int g = 0; g < n_groups; ++g) {
        double diff = 0.0, tot = 0.0;
        for (long long k = g * per; k < (g + 1) * per; ++k) {
            diff += summaries[k].integral_diff;
            tot += summaries[k].integral_tot;
        }
        if (tot == 0.0)
            throw ArgumentError("subensemble_asymmetries: vacuum sub-ensemble, A undefined");
        a_j[g] = diff / tot;
    }
    return a_j;
}

inline EnsembleStats compute_asymmetry(const std::vector<TrajectorySummary>& summaries,
                                       const StatsConfig& cfg) {
    cfg.validate();
    if (summaries.empty()) throw ArgumentError("compute_asymmetry: empty ensemble");
    EnsembleStats out;
    out.n_trajectories = static_cast<long long>(summaries.size());
    double sum_diff = 0.0, sum_tot = 0.0;
    for (const auto& s : summaries) {
        sum_diff += s.integral_diff / s.duration;
        sum_tot += s.integral_tot / s.duration;
    }
    out.n_diff = sum_diff / double(summaries.size());
    out.n_tot = sum_tot / double(summaries.size());
    if (out.n_tot == 0.0) throw ArgumentError("compute_asymmetry: all-vacuum ensemble, A undefined");
    out.a = out.n_diff / out.n_tot;

    const int n_a = (out.n_trajectories % cfg.n_subensembles == 0) ? cfg.n_subensembles : 1;
    out.a_j = subensemble_asymmetries(summaries, n_a);
    double mean = 0.0;
    for (double v : out.a_j) mean += v;
    out.a_opt = mean / double(n_a);
    if (n_a > 1) {
        double ss = 0.0;
        for (double v : out.a_j) ss += (v - out.a_opt) * (v - out.a_opt);
        out.sigma_a_opt = std::sqrt(ss / double(n_a - 1));
    }
    out.p_n_diff = detail::merge_histograms(summaries, cfg.hist_bin_width);
    return out;
}

inline EnsembleStats compute_asymmetry(const std::vector<TrajectoryResult>& trajectories,
                                       const StatsConfig& cfg) {
    std::vector<TrajectorySummary> summaries;
    summaries.reserve(trajectories.size());
    for (const auto& t : trajectories) summaries.push_back(summarize_trajectory(t, cfg));
    return compute_asymmetry(summaries, cfg);
}

// (A_opt, sigma, A_j) with the strict divisibility contract.
inline EnsembleStats compute_a_opt(const std::vector<TrajectorySummary>& summaries,
                                   const StatsConfig& cfg) {
    cfg.validate();
    if (summaries.empty()) throw ArgumentError("compute_a_opt: empty ensemble");
    if (static_cast<long long>(summaries.size()) % cfg.n_subensembles != 0)
        throw ArgumentError("compute_a_opt: trajectory count must be divisible by N_a");
    return compute_asymmetry(summaries, cfg);
}

inline HistogramData histogram_n_diff(const std::vector<TrajectoryResult>& trajectories,
                                      const StatsConfig& cfg) {
    cfg.validate();
    std::vector<TrajectorySummary> summaries;
    summaries.reserve(trajectories.size());
    for (const auto& t : trajectories) summaries.push_back(summarize_trajectory(t, cfg));
    return detail::merge_histograms(summaries, cfg.hist_bin_width);
}

} // namespace bhd
