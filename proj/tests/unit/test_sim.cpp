#include "doctest.h"

#include <cmath>
#include <memory>
#include <sstream>

#include "certkit/accuracy.hpp"
#include "certkit/sim.hpp"

using namespace certkit;

namespace {

struct Setup {
    StochasticLti m = case_study_model();
    Matrix K, L;
    std::shared_ptr<const SymbolicController> ctrl;
    PrecisionCertificate cert[2];
};

const Setup& setup() {
    static const Setup s = [] {
        Setup out;
        out.K = solve_dare_lq(out.m.A, out.m.B, out.m.H, Matrix()).K;
        out.L = solve_dare_kalman(out.m.A, out.m.C, out.m.F, out.m.E).L;
        const DeterministicLti planar = planar_submodel(noiseless(out.m));
        const SymbolicAbstraction abs =
            abstract(planar, Grid({15, 15}, {25, 25}, {0.25, 0.25}), Grid({10, 10}, {30, 30}, {1, 1}));
        out.ctrl = std::make_shared<const SymbolicController>(synthesize_reach_stay(abs, {{20.5, 20.5}, {21, 21}}));
        const Vector x = make_vector({16, 16, 0});
        out.cert[0] = certify_stochastic(out.m, out.K, out.L, x, x, 0, InterfaceKind::sensor_based);
        out.cert[1] = certify_stochastic(out.m, Matrix::Zero(2, 3), out.L, x, x, 0, InterfaceKind::feedforward);
        return out;
    }();
    return s;
}

ClosedLoopSystem loop(int interface, const StochasticLti& m, const Vector& xbar0) {
    const Setup& s = setup();
    const InterfaceFn ifc = interface == 0 ? InterfaceFn::sensor_based(s.K) : InterfaceFn::feedforward();
    return compose_closed_loop(m, symbolic_law(s.ctrl), Observer{s.L, xbar0}, ifc, xbar0, Mode::reach);
}

ClosedLoopSystem case_loop(int interface) { return loop(interface, setup().m, make_vector({16, 16, 0})); }

Trajectory constant_dev(std::size_t n, double c) {
    Trajectory t;
    t.records.resize(n);
    for (StepRecord& r : t.records) r.dev = c;
    return t;
}

} // namespace

TEST_CASE("noise-free loop with matched initial states tracks the ideal exactly") {
    StochasticLti m = case_study_model();
    m.F.setZero();
    m.E.setZero();
    m.x0 = make_vector({16, 16, 0});
    NoiseSource noise(0, 0);
    for (int i = 0; i < 2; ++i) {
        const Trajectory t = simulate(loop(i, m, m.x0), 300, noise);
        for (const StepRecord& r : t.records) {
            CHECK(r.dev == 0.0);
        }
    }
}

TEST_CASE("trajectory records") {
    NoiseSource a(5, 0), b(5, 0);
    const Trajectory t1 = simulate(case_loop(0), 50, a);
    const Trajectory t2 = simulate(case_loop(0), 50, b);
    REQUIRE(t1.size() == 51);
    CHECK(t1.horizon() == 50);
    const StochasticLti& m = setup().m;
    for (std::size_t k = 0; k < t1.size(); ++k) {
        const StepRecord& r = t1.records[k];
        CHECK(r.z == m.H * r.x);
        CHECK(r.zbar == m.H * r.xbar);
        CHECK(r.dev == doctest::Approx((r.z - r.zbar).norm()));
        CHECK(r.x == t2.records[k].x); // bitwise replay
        CHECK(r.y == t2.records[k].y);
    }
    CHECK(t1.records.front().x == m.x0);
    CHECK(a.draws() == 51 * 5);
    NoiseSource c(5, 0);
    CHECK_THROWS(simulate(case_loop(0), 0, c));
}

TEST_CASE("random initial state when P0 is nonzero") {
    StochasticLti m = case_study_model();
    m.P0 = 0.25 * Matrix::Identity(3, 3);
    NoiseSource noise(1, 0);
    const Trajectory t = simulate(loop(0, m, make_vector({16, 16, 0})), 1, noise);
    CHECK((t.records.front().x - m.x0).norm() > 0.0);
    CHECK((t.records.front().x - m.x0).norm() < 5.0);
}

TEST_CASE("empirical epsilon") {
    CHECK(empirical_epsilon(constant_dev(10, 0.0), {0, 10}) == 0.0);
    CHECK(empirical_epsilon(constant_dev(10, 0.7), {2, 9}) == doctest::Approx(0.7));
    CHECK(empirical_epsilon(std::vector<Trajectory>{constant_dev(5, 1.0), constant_dev(5, 3.0)}, {0, 5}) ==
          doctest::Approx(std::sqrt(5.0)));
    CHECK_THROWS(empirical_epsilon(constant_dev(10, 1.0), {5, 5}));
    CHECK_THROWS(empirical_epsilon(constant_dev(10, 1.0), {0, 11}));
    CHECK_THROWS(empirical_epsilon(std::vector<Trajectory>{}, {0, 1}));
}

TEST_CASE("Monte Carlo: single run, stream independence, parallel equals serial") {
    MonteCarloOptions opt;
    opt.horizon = 200;
    opt.n_runs = 1;
    opt.base_seed = 9;
    opt.keep_trajectories = true;
    opt.stationary = {100, 201};
    const ClosedLoopSystem cls = case_loop(1);
    const MonteCarloSummary one = monte_carlo(cls, opt);
    NoiseSource noise(9, 0);
    const Trajectory direct = simulate(cls, 200, noise);
    CHECK(one.trajectories.front().records.back().x == direct.records.back().x);
    CHECK(*one.eps_transient == empirical_epsilon(direct, opt.transient));

    opt.n_runs = 4;
    const MonteCarloSummary four = monte_carlo(cls, opt);
    opt.n_runs = 8;
    const MonteCarloSummary eight = monte_carlo(cls, opt);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(four.run_eps_stationary[i] == eight.run_eps_stationary[i]);
        CHECK(four.run_eps_transient[i] == eight.run_eps_transient[i]);
    }
    const MonteCarloSummary serial = monte_carlo_serial(cls, opt);
    CHECK(serial.mean_dev == eight.mean_dev);
    CHECK(serial.max_dev == eight.max_dev);
    CHECK(*serial.eps_stationary == *eight.eps_stationary);
    CHECK(eight.streams == std::vector<std::uint64_t>{0, 1, 2, 3, 4, 5, 6, 7});

    opt.stationary = {100, 4000}; // does not fit the horizon
    CHECK_FALSE(monte_carlo(cls, opt).eps_stationary.has_value());
    opt.n_runs = 0;
    CHECK_THROWS(monte_carlo(cls, opt));
}

TEST_CASE("case study: final output near the target after 210 steps") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        NoiseSource noise(seed, 0);
        const Trajectory t = simulate(case_loop(0), 210, noise);
        const Vector& z = t.records.back().z;
        const double slack = 3 * setup().cert[0].eps_inf;
        for (int d = 0; d < 2; ++d) {
            CHECK(z(d) >= 20.5 - slack);
            CHECK(z(d) <= 21 + slack);
        }
    }
}

TEST_CASE("case study statistics over 32 runs") {
    MonteCarloOptions opt;
    opt.horizon = 4000;
    opt.n_runs = 32;
    opt.keep_trajectories = true;
    const Setup& s = setup();
    MonteCarloSummary sum[2];
    for (int i = 0; i < 2; ++i) {
        sum[i] = monte_carlo(case_loop(i), opt);
        const PrecisionCertificate& cert = s.cert[i];
        // estimator consistency
        CHECK(std::abs(*sum[i].eps_stationary - cert.eps_inf) <= 0.1 * cert.eps_inf);

        // certificate mean bound (Jensen) at fixed times, including stationarity
        for (std::size_t t : {std::size_t{1}, std::size_t{5}, std::size_t{50}, std::size_t{2000}}) {
            double mean = 0.0, sq = 0.0;
            for (const Trajectory& tr : sum[i].trajectories) {
                mean += tr.records[t].dev;
                sq += tr.records[t].dev * tr.records[t].dev;
            }
            mean /= 32.0;
            const double se = std::sqrt(std::max(0.0, sq / 32.0 - mean * mean) / 31.0);
            const double bound = t < cert.eps_trajectory.size() ? cert.eps_trajectory[t] : cert.eps_inf;
            CHECK(mean <= bound + 3 * se);
        }
    }
    // ordering holds in every run's stationary window
    for (std::size_t r = 0; r < 32; ++r) {
        CHECK(sum[0].run_eps_stationary[r] < sum[1].run_eps_stationary[r]);
    }
    // observer convergence: time-averaged ‖x − x̂‖ against the stationary error covariance
    const double bound = std::sqrt(s.cert[0].Q_inf.bottomRightCorner(3, 3).trace());
    std::vector<double> per_run;
    for (const Trajectory& tr : sum[0].trajectories) {
        double acc = 0.0;
        for (std::size_t t = 100; t < 4000; ++t) acc += (tr.records[t].x - tr.records[t].xhat).norm();
        per_run.push_back(acc / 3900.0);
    }
    double mean = 0.0, sq = 0.0;
    for (double v : per_run) {
        mean += v;
        sq += v * v;
    }
    mean /= 32.0;
    const double se = std::sqrt(std::max(0.0, sq / 32.0 - mean * mean) / 31.0);
    CHECK(mean <= bound + 3 * se);
}

TEST_CASE("trajectory CSV layout") {
    NoiseSource noise(0, 0);
    const Trajectory t = simulate(case_loop(0), 3, noise);
    std::ostringstream os;
    write_trajectory_csv(os, t);
    std::istringstream in(os.str());
    std::string header, row;
    std::getline(in, header);
    CHECK(header ==
          "t,xbar1,xbar2,xbar3,q,xhat1,xhat2,xhat3,x1,x2,x3,ubar1,ubar2,u1,u2,y1,y2,z1,z2,zbar1,zbar2,dev");
    std::getline(in, row);
    CHECK(row.rfind("0,16,16,0,0,16,16,0,16,14,-5,", 0) == 0);
    int lines = 1;
    while (std::getline(in, row)) ++lines;
    CHECK(lines == 4);

    std::ostringstream fig3, fig4;
    write_output_plot_csv(fig3, {"a"}, {&t});
    write_estimation_plot_csv(fig4, {"a"}, {&t});
    CHECK(fig3.str().rfind("t,ideal_z1,ideal_z2,a_z1,a_z2\n", 0) == 0);
    CHECK(fig4.str().rfind("t,a_err1,a_err2,a_err3,a_dev,disturbance\n", 0) == 0);
}
