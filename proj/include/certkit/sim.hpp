#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "certkit/noise.hpp"
#include "certkit/refine.hpp"

namespace certkit {

/// Records for t = 0 .. horizon.
struct Trajectory {
    std::vector<StepRecord> records;

    std::size_t size() const { return records.size(); }
    std::size_t horizon() const { return records.empty() ? 0 : records.size() - 1; }
};

/// Runs horizon + 1 steps of a copy of `cls` from its initial state. x(0) is drawn from
/// N(x0, P0) first when P0 ≠ 0; each step then draws w1 followed by w2.
Trajectory simulate(const ClosedLoopSystem& cls, std::size_t horizon, NoiseSource& noise);

/// Half-open time window [lo, hi).
struct Window {
    std::size_t lo = 0;
    std::size_t hi = 0;
};

/// sqrt of the mean of ‖z − z̄‖² over all runs and t ∈ [lo, hi).
double empirical_epsilon(const std::vector<Trajectory>& trajs, Window w);
double empirical_epsilon(const Trajectory& traj, Window w);

struct MonteCarloOptions {
    std::size_t horizon = 4000;
    std::size_t n_runs = 32;
    std::uint64_t base_seed = 0;
    Window transient{1, 101};
    Window stationary{100, 4000};
    bool keep_trajectories = false;
};

struct MonteCarloSummary {
    std::vector<double> mean_dev; // per t, over runs
    std::vector<double> max_dev;
    std::vector<std::uint64_t> streams; // run i uses (base_seed, streams[i])
    std::vector<double> run_eps_transient;
    std::vector<double> run_eps_stationary;
    /// Pooled over runs; empty when the window does not fit the horizon.
    std::optional<double> eps_transient;
    std::optional<double> eps_stationary;
    std::vector<Trajectory> trajectories; // only with keep_trajectories
};

/// Runs are distributed over OpenMP threads; results do not depend on the thread count.
MonteCarloSummary monte_carlo(const ClosedLoopSystem& cls, const MonteCarloOptions& opt);
MonteCarloSummary monte_carlo_serial(const ClosedLoopSystem& cls, const MonteCarloOptions& opt);

/// `t,xbar1..n,q,xhat1..n,x1..n,ubar1..m,u1..m,y1..p,z1..q,zbar1..q,dev`
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// Zone-temperature panel: `t`, then z̄ of the first trajectory, then z of each trajectory.
void write_output_plot_csv(std::ostream& os, const std::vector<std::string>& labels,
                           const std::vector<const Trajectory*>& trajs);
/// Estimation-error panel: per trajectory, x − x̂ componentwise and ‖z − z̄‖; the last
/// state of the first trajectory is appended as the disturbance column.
void write_estimation_plot_csv(std::ostream& os, const std::vector<std::string>& labels,
                               const std::vector<const Trajectory*>& trajs);

} // namespace certkit
