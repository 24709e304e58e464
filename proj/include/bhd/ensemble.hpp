#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "bhd/detection.hpp"
#include "bhd/stats.hpp"
#include "bhd/trajectory.hpp"

namespace bhd {

struct EnsembleConfig {
    TrajectoryConfig trajectory;
    StatsConfig stats;
    int n_trajectories = 1000;
    std::uint64_t base_seed = 12345;
    double eta = 1.0;   // eta < 1 switches to the conditioned density-matrix engine
    int workers = 0;    // 0 = hardware concurrency
    bool keep_series = false; // retain per-trajectory population series

    void validate() const {
        trajectory.validate();
        stats.validate();
        DetectionConfig{eta}.validate();
        if (n_trajectories < 1) throw ArgumentError("EnsembleConfig: need n_trajectories >= 1");
    }
};

struct EnsembleData {
    std::vector<TrajectorySummary> summaries; // indexed by trajectory
    EnsembleStats stats;
    // Optional per-trajectory series (trajectory-major), on the record grid.
    std::vector<double> record_times;
    std::vector<std::vector<double>> series_n1;
    std::vector<std::vector<double>> series_n2;
    long long truncation_warnings = 0;
};

// Runs n_trajectories independent trajectories with per-index seeds and a
// dynamic work queue. Results land in index-order slots and are reduced
// after the join, so the outcome is identical for any worker count.
inline EnsembleData run_ensemble(const EnsembleConfig& cfg) {
    cfg.validate();
    const int n = cfg.n_trajectories;
    int workers = cfg.workers > 0 ? cfg.workers
                                  : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = std::min(workers, n);

    EnsembleData data;
    data.summaries.resize(n);
    if (cfg.keep_series) {
        data.series_n1.resize(n);
        data.series_n2.resize(n);
    }

    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    const auto worker = [&]() {
        DimerTables tables(cfg.trajectory.system, cfg.trajectory.basis, cfg.trajectory.dt);
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= n) break;
            try {
                const std::uint64_t seed = trajectory_seed(cfg.base_seed, k);
                TrajectoryResult traj = (cfg.eta < 1.0)
                                            ? run_dm_trajectory(tables, cfg.trajectory, cfg.eta, seed)
                                            : run_trajectory(tables, cfg.trajectory, seed);
                data.summaries[k] = summarize_trajectory(traj, cfg.stats);
                if (cfg.keep_series) {
                    data.series_n1[k] = std::move(traj.n1);
                    data.series_n2[k] = std::move(traj.n2);
                    if (k == 0) data.record_times = traj.times;
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(n); // stop handing out work
                break;
            }
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    if (cfg.keep_series && data.record_times.empty() && !data.series_n1.empty())
        throw NumericalError("run_ensemble: record grid missing");

    for (const auto& s : data.summaries)
        if (s.truncation_warning) ++data.truncation_warnings;
    data.stats = compute_asymmetry(data.summaries, cfg.stats);
    return data;
}

} // namespace bhd
