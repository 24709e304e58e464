#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "bhd/ensemble.hpp"

namespace bhd {

struct OptimizationError : Error {
    using Error::Error;
};

using CoeffVector = std::array<double, 3>; // (c0, c_s, c_a)

struct CoeffBox {
    CoeffVector lo{4.0, 0.5, -4.0};
    CoeffVector hi{13.0, 4.0, -0.5};
};

struct OptimizerConfig {
    int budget = 30;             // cost evaluations, each on a distinct coefficient vector
    int n_trajectories = 1000;   // per evaluation
    int n_subensembles = 10;
    CoeffBox initial_region;
    double reflection = 1.0;
    double expansion = 2.0;
    double contraction = 0.5;
    double shrink = 0.5;
    std::uint64_t base_seed = 12345;
    // One shared random stream across candidate points makes the noisy
    // landscape quasi-deterministic for the simplex; switchable off, in
    // which case every evaluation draws a fresh stream.
    bool common_random_numbers = true;
    int final_n_trajectories = 0; // 0 = n_trajectories

    void validate() const {
        if (budget < 4) throw ArgumentError("OptimizerConfig: budget must be >= 4");
        if (n_trajectories < 1 || n_subensembles < 1 ||
            n_trajectories % n_subensembles != 0)
            throw ArgumentError("OptimizerConfig: N_T must be a positive multiple of N_a");
        for (int k = 0; k < 3; ++k)
            if (!(initial_region.lo[k] < initial_region.hi[k]))
                throw ArgumentError("OptimizerConfig: initial region must have positive extent");
    }
};

struct EvalPoint {
    CoeffVector c{};
    double a_opt = 0.0;
    double sigma = 0.0;
    bool failed = false;
};

struct OptimizerTrace {
    std::vector<EvalPoint> evaluated;
    int best_index = -1;
    // Fresh-seed re-evaluation at the winning point.
    double final_a = 0.0;
    double final_a_opt = 0.0;
    double final_sigma = 0.0;

    const EvalPoint& best() const { return evaluated.at(best_index); }
};

namespace detail {

struct SimplexVertex {
    CoeffVector x;
    double cost;
    int order; // insertion index, stable tie-break
};

inline CoeffVector axpy(const CoeffVector& a, double s, const CoeffVector& b) {
    return {a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]};
}

inline CoeffVector sub(const CoeffVector& a, const CoeffVector& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

} // namespace detail

// Downhill-simplex search for the feedback coefficients maximizing the
// sub-ensemble asymmetry estimate; the cost function is -A_opt. Stops on
// the evaluation budget alone. The trajectory template supplies everything
// but the coefficients (clamp bounds, slew limit, basis, dt, horizon) and
// eta selects the detection model.
inline OptimizerTrace optimize(const TrajectoryConfig& trajectory_template,
                               const StatsConfig& stats_template, const OptimizerConfig& cfg,
                               double eta = 1.0, int workers = 0) {
    cfg.validate();
    StatsConfig stats = stats_template;
    stats.n_subensembles = cfg.n_subensembles;

    OptimizerTrace trace;
    std::map<CoeffVector, double> cache;
    long long failures = 0;

    const auto evaluate = [&](const CoeffVector& c) {
        if (const auto it = cache.find(c); it != cache.end()) return it->second;
        EnsembleConfig ens;
        ens.trajectory = trajectory_template;
        ens.trajectory.feedback.c0 = c[0];
        ens.trajectory.feedback.c_s = c[1];
        ens.trajectory.feedback.c_a = c[2];
        ens.stats = stats;
        ens.n_trajectories = cfg.n_trajectories;
        ens.eta = eta;
        ens.workers = workers;
        ens.base_seed = cfg.common_random_numbers
                            ? cfg.base_seed
                            : splitmix64(cfg.base_seed + trace.evaluated.size() + 1);
        EvalPoint point;
        point.c = c;
        try {
            const EnsembleData data = run_ensemble(ens);
            point.a_opt = data.stats.a_opt;
            point.sigma = data.stats.sigma_a_opt;
        } catch (const ArgumentError&) {
            point.failed = true;
            point.a_opt = -std::numeric_limits<double>::infinity();
            ++failures;
        }
        trace.evaluated.push_back(point);
        if (!point.failed &&
            (trace.best_index < 0 || point.a_opt > trace.evaluated[trace.best_index].a_opt))
            trace.best_index = static_cast<int>(trace.evaluated.size()) - 1;
        const double cost = -point.a_opt;
        cache.emplace(c, cost);
        return cost;
    };
    const auto budget_left = [&]() {
        return static_cast<int>(cache.size()) < cfg.budget;
    };

    // Corner-plus-axis starting simplex over the initial box.
    const CoeffVector lo = cfg.initial_region.lo;
    const CoeffVector extent = detail::sub(cfg.initial_region.hi, lo);
    std::vector<detail::SimplexVertex> simplex;
    for (int v = 0; v < 4 && budget_left(); ++v) {
        CoeffVector x = lo;
        if (v > 0) x[v - 1] += extent[v - 1];
        simplex.push_back({x, evaluate(x), v});
    }

    int order_counter = static_cast<int>(simplex.size());
    const auto sort_simplex = [&]() {
        std::stable_sort(simplex.begin(), simplex.end(),
                         [](const detail::SimplexVertex& a, const detail::SimplexVertex& b) {
                             if (a.cost != b.cost) return a.cost < b.cost;
                             return a.order < b.order;
                         });
    };

    while (simplex.size() == 4 && budget_left()) {
        sort_simplex();
        const CoeffVector& worst = simplex[3].x;
        CoeffVector centroid{0.0, 0.0, 0.0};
        for (int v = 0; v < 3; ++v)
            for (int k = 0; k < 3; ++k) centroid[k] += simplex[v].x[k] / 3.0;

        const CoeffVector dir = detail::sub(centroid, worst);
        const CoeffVector xr = detail::axpy(centroid, cfg.reflection, dir);
        const double fr = evaluate(xr);

        if (fr < simplex[0].cost) {
            if (!budget_left()) {
                simplex[3] = {xr, fr, order_counter++};
                break;
            }
            const CoeffVector xe = detail::axpy(centroid, cfg.reflection * cfg.expansion, dir);
            const double fe = evaluate(xe);
            simplex[3] = (fe < fr) ? detail::SimplexVertex{xe, fe, order_counter++}
                                   : detail::SimplexVertex{xr, fr, order_counter++};
            continue;
        }
        if (fr < simplex[2].cost) {
            simplex[3] = {xr, fr, order_counter++};
            continue;
        }
        if (!budget_left()) break;
        if (fr < simplex[3].cost) {
            // Outside contraction.
            const CoeffVector xc = detail::axpy(centroid, cfg.reflection * cfg.contraction, dir);
            const double fc = evaluate(xc);
            if (fc <= fr) {
                simplex[3] = {xc, fc, order_counter++};
                continue;
            }
        } else {
            // Inside contraction.
            const CoeffVector xc = detail::axpy(centroid, -cfg.contraction, dir);
            const double fc = evaluate(xc);
            if (fc < simplex[3].cost) {
                simplex[3] = {xc, fc, order_counter++};
                continue;
            }
        }
        // Shrink toward the best vertex.
        for (int v = 1; v < 4 && budget_left(); ++v) {
            const CoeffVector x =
                detail::axpy(simplex[0].x, cfg.shrink, detail::sub(simplex[v].x, simplex[0].x));
            simplex[v] = {x, evaluate(x), order_counter++};
        }
    }

    if (trace.best_index < 0)
        throw OptimizationError("optimize: all " + std::to_string(failures) +
                                " evaluations failed (vacuum ensembles?)");

    // High-fidelity report at the winner, fresh random stream.
    EnsembleConfig fin;
    fin.trajectory = trajectory_template;
    const CoeffVector bc = trace.best().c;
    fin.trajectory.feedback.c0 = bc[0];
    fin.trajectory.feedback.c_s = bc[1];
    fin.trajectory.feedback.c_a = bc[2];
    fin.stats = stats;
    fin.n_trajectories = cfg.final_n_trajectories > 0 ? cfg.final_n_trajectories
                                                      : cfg.n_trajectories;
    if (fin.n_trajectories % stats.n_subensembles != 0)
        fin.stats.n_subensembles = 1;
    fin.eta = eta;
    fin.workers = workers;
    fin.base_seed = splitmix64(cfg.base_seed ^ 0xF00D5EEDULL);
    const EnsembleData final_data = run_ensemble(fin);
    trace.final_a = final_data.stats.a;
    trace.final_a_opt = final_data.stats.a_opt;
    trace.final_sigma = final_data.stats.sigma_a_opt;
    return trace;
}

struct SweepRow {
    double j = 0.0;
    CoeffVector c{};
    double a_opt = 0.0;
    double sigma = 0.0;
    double final_a = 0.0;
    double final_sigma = 0.0;
};

// Per-coupling optimization in the layout of the coefficient table.
inline std::vector<SweepRow> sweep_coupling(const std::vector<double>& j_values,
                                            const TrajectoryConfig& trajectory_template,
                                            const StatsConfig& stats, const OptimizerConfig& cfg,
                                            int workers = 0) {
    std::vector<SweepRow> rows;
    rows.reserve(j_values.size());
    for (const double j : j_values) {
        TrajectoryConfig traj = trajectory_template;
        traj.system.j = j;
        const OptimizerTrace trace = optimize(traj, stats, cfg, 1.0, workers);
        SweepRow row;
        row.j = j;
        row.c = trace.best().c;
        row.a_opt = trace.best().a_opt;
        row.sigma = trace.best().sigma;
        row.final_a = trace.final_a;
        row.final_sigma = trace.final_sigma;
        rows.push_back(row);
    }
    return rows;
}

} // namespace bhd
