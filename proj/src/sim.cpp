#include "certkit/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>

#include "certkit/errors.hpp"

namespace certkit {

namespace {

Vector draw_initial(const StochasticLti& m, NoiseSource& noise) {
    if (m.P0.isZero(0.0)) {
        return m.x0;
    }
    const SymmetricEigen eig = symmetric_eigen(m.P0);
    const Vector root = eig.values.cwiseMax(0.0).cwiseSqrt();
    return m.x0 + eig.vectors * root.asDiagonal() * noise.normal_vector(m.states());
}

bool fits(Window w, std::size_t records) { return w.lo < w.hi && w.hi <= records; }

double sum_sq_dev(const Trajectory& traj, Window w) {
    double s = 0.0;
    for (std::size_t t = w.lo; t < w.hi; ++t) {
        s += traj.records[t].dev * traj.records[t].dev;
    }
    return s;
}

void check_window(const Trajectory& traj, Window w) {
    if (!fits(w, traj.size())) {
        throw Error("empirical_epsilon: window [" + std::to_string(w.lo) + ", " + std::to_string(w.hi) +
                    ") is empty or exceeds the trajectory");
    }
}

struct RunResult {
    Trajectory traj;
    double eps_transient = 0.0;
    double eps_stationary = 0.0;
};

RunResult run_one(const ClosedLoopSystem& cls, const MonteCarloOptions& opt, std::uint64_t stream) {
    NoiseSource noise(opt.base_seed, stream);
    RunResult r;
    r.traj = simulate(cls, opt.horizon, noise);
    if (fits(opt.transient, r.traj.size())) {
        r.eps_transient = empirical_epsilon(r.traj, opt.transient);
    }
    if (fits(opt.stationary, r.traj.size())) {
        r.eps_stationary = empirical_epsilon(r.traj, opt.stationary);
    }
    return r;
}

// Order-fixed reduction so the parallel and serial paths agree bit for bit.
MonteCarloSummary aggregate(std::vector<RunResult>& runs, const MonteCarloOptions& opt) {
    MonteCarloSummary s;
    const std::size_t len = opt.horizon + 1;
    s.mean_dev.assign(len, 0.0);
    s.max_dev.assign(len, 0.0);
    double sum_tr = 0.0;
    double sum_st = 0.0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const Trajectory& tr = runs[i].traj;
        for (std::size_t t = 0; t < len; ++t) {
            s.mean_dev[t] += tr.records[t].dev;
            s.max_dev[t] = std::max(s.max_dev[t], tr.records[t].dev);
        }
        s.streams.push_back(i);
        if (fits(opt.transient, len)) {
            s.run_eps_transient.push_back(runs[i].eps_transient);
            sum_tr += sum_sq_dev(tr, opt.transient);
        }
        if (fits(opt.stationary, len)) {
            s.run_eps_stationary.push_back(runs[i].eps_stationary);
            sum_st += sum_sq_dev(tr, opt.stationary);
        }
    }
    const auto n = static_cast<double>(runs.size());
    for (double& v : s.mean_dev) {
        v /= n;
    }
    if (fits(opt.transient, len)) {
        s.eps_transient = std::sqrt(sum_tr / (n * static_cast<double>(opt.transient.hi - opt.transient.lo)));
    }
    if (fits(opt.stationary, len)) {
        s.eps_stationary =
            std::sqrt(sum_st / (n * static_cast<double>(opt.stationary.hi - opt.stationary.lo)));
    }
    if (opt.keep_trajectories) {
        for (RunResult& r : runs) {
            s.trajectories.push_back(std::move(r.traj));
        }
    }
    return s;
}

void check_options(const MonteCarloOptions& opt) {
    if (opt.n_runs == 0) {
        throw Error("monte_carlo: n_runs must be at least 1");
    }
    if (opt.horizon == 0) {
        throw Error("monte_carlo: horizon must be at least 1");
    }
}

void put(std::ostream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ",%.9g", v);
    os << buf;
}

void put_all(std::ostream& os, const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        put(os, v(i));
    }
}

void header(std::ostream& os, const char* name, Eigen::Index n) {
    for (Eigen::Index i = 1; i <= n; ++i) {
        os << ',' << name << i;
    }
}

void require_aligned(const std::vector<std::string>& labels, const std::vector<const Trajectory*>& trajs) {
    if (trajs.empty() || labels.size() != trajs.size()) {
        throw DimensionError("plot data: need one label per trajectory");
    }
    for (const Trajectory* t : trajs) {
        if (t->size() != trajs.front()->size() || t->records.empty()) {
            throw DimensionError("plot data: trajectories must share a nonzero length");
        }
    }
}

} // namespace

Trajectory simulate(const ClosedLoopSystem& cls, std::size_t horizon, NoiseSource& noise) {
    if (horizon == 0) {
        throw Error("simulate: horizon must be at least 1");
    }
    ClosedLoopSystem sys = cls;
    const StochasticLti& m = sys.plant();
    sys.reset(draw_initial(m, noise));
    Trajectory traj;
    traj.records.reserve(horizon + 1);
    const Eigen::Index d1 = m.process_noise();
    const Eigen::Index d2 = m.sensor_noise();
    for (std::size_t t = 0; t <= horizon; ++t) {
        const Vector w1 = noise.normal_vector(d1);
        const Vector w2 = noise.normal_vector(d2);
        traj.records.push_back(sys.step(w1, w2));
    }
    return traj;
}

double empirical_epsilon(const Trajectory& traj, Window w) {
    check_window(traj, w);
    return std::sqrt(sum_sq_dev(traj, w) / static_cast<double>(w.hi - w.lo));
}

double empirical_epsilon(const std::vector<Trajectory>& trajs, Window w) {
    if (trajs.empty()) {
        throw Error("empirical_epsilon: no trajectories");
    }
    double s = 0.0;
    for (const Trajectory& tr : trajs) {
        check_window(tr, w);
        s += sum_sq_dev(tr, w);
    }
    return std::sqrt(s / (static_cast<double>(trajs.size()) * static_cast<double>(w.hi - w.lo)));
}

MonteCarloSummary monte_carlo(const ClosedLoopSystem& cls, const MonteCarloOptions& opt) {
    check_options(opt);
    std::vector<RunResult> runs(opt.n_runs);
    const auto n = static_cast<std::int64_t>(opt.n_runs);
    // the law may hold a shared controller; ClosedLoopSystem copies are independent
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            runs[static_cast<std::size_t>(i)] = run_one(cls, opt, static_cast<std::uint64_t>(i));
        } catch (...) {
#pragma omp critical(certkit_mc_failure)
            if (!failure) {
                failure = std::current_exception();
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return aggregate(runs, opt);
}

MonteCarloSummary monte_carlo_serial(const ClosedLoopSystem& cls, const MonteCarloOptions& opt) {
    check_options(opt);
    std::vector<RunResult> runs;
    runs.reserve(opt.n_runs);
    for (std::size_t i = 0; i < opt.n_runs; ++i) {
        runs.push_back(run_one(cls, opt, i));
    }
    return aggregate(runs, opt);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    if (traj.records.empty()) {
        throw DimensionError("write_trajectory_csv: empty trajectory");
    }
    const StepRecord& r0 = traj.records.front();
    os << 't';
    header(os, "xbar", r0.xbar.size());
    os << ",q";
    header(os, "xhat", r0.xhat.size());
    header(os, "x", r0.x.size());
    header(os, "ubar", r0.ubar.size());
    header(os, "u", r0.u.size());
    header(os, "y", r0.y.size());
    header(os, "z", r0.z.size());
    header(os, "zbar", r0.zbar.size());
    os << ",dev\n";
    for (std::size_t t = 0; t < traj.size(); ++t) {
        const StepRecord& r = traj.records[t];
        os << t;
        put_all(os, r.xbar);
        os << ',' << static_cast<int>(r.q);
        put_all(os, r.xhat);
        put_all(os, r.x);
        put_all(os, r.ubar);
        put_all(os, r.u);
        put_all(os, r.y);
        put_all(os, r.z);
        put_all(os, r.zbar);
        put(os, r.dev);
        os << '\n';
    }
}

void write_output_plot_csv(std::ostream& os, const std::vector<std::string>& labels,
                           const std::vector<const Trajectory*>& trajs) {
    require_aligned(labels, trajs);
    const Eigen::Index q = trajs.front()->records.front().z.size();
    os << 't';
    header(os, "ideal_z", q);
    for (const std::string& l : labels) {
        header(os, (l + "_z").c_str(), q);
    }
    os << '\n';
    for (std::size_t t = 0; t < trajs.front()->size(); ++t) {
        os << t;
        put_all(os, trajs.front()->records[t].zbar);
        for (const Trajectory* tr : trajs) {
            put_all(os, tr->records[t].z);
        }
        os << '\n';
    }
}

void write_estimation_plot_csv(std::ostream& os, const std::vector<std::string>& labels,
                               const std::vector<const Trajectory*>& trajs) {
    require_aligned(labels, trajs);
    const Eigen::Index n = trajs.front()->records.front().x.size();
    os << 't';
    for (const std::string& l : labels) {
        header(os, (l + "_err").c_str(), n);
        os << ',' << l << "_dev";
    }
    os << ",disturbance\n";
    for (std::size_t t = 0; t < trajs.front()->size(); ++t) {
        os << t;
        for (const Trajectory* tr : trajs) {
            const StepRecord& r = tr->records[t];
            put_all(os, r.x - r.xhat);
            put(os, r.dev);
        }
        put(os, trajs.front()->records[t].x(n - 1));
        os << '\n';
    }
}

} // namespace certkit
