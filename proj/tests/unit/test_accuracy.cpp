#include "doctest.h"

#include <cmath>
#include <random>

#include "certkit/accuracy.hpp"
#include "helpers.hpp"

using namespace certkit;

namespace {

// Independent references (scipy Lyapunov solver, plain moment recursion, cvxpy/Clarabel SDP).
constexpr double kEpsInf[2] = {0.12839959651591737, 0.48895374542193826};
constexpr double kEpsSup[2] = {2.0, 2.733512919226124};
constexpr double kMinTrace[2] = {2.118213983882026, 3.9618029030775124};

struct CaseCerts {
    PrecisionCertificate cert[2];
    Matrix K, L;
};

const CaseCerts& case_certs() {
    static const CaseCerts c = [] {
        const StochasticLti m = case_study_model();
        CaseCerts out;
        out.K = solve_dare_lq(m.A, m.B, m.H, Matrix()).K;
        out.L = solve_dare_kalman(m.A, m.C, m.F, m.E).L;
        const Vector x = make_vector({16, 16, 0});
        out.cert[0] = certify_stochastic(m, out.K, out.L, x, x, 0, InterfaceKind::sensor_based);
        out.cert[1] = certify_stochastic(m, Matrix::Zero(2, 3), out.L, x, x, 0, InterfaceKind::feedforward);
        return out;
    }();
    return c;
}

StochasticLti scalar_model(double a) {
    return StochasticLti{make_matrix({{a}}), make_matrix({{1}}), make_matrix({{1}}), make_matrix({{1}}),
                         Matrix::Zero(1, 1), Matrix::Zero(1, 1), make_vector({0}), Matrix::Zero(1, 1)};
}

} // namespace

TEST_CASE("epsilon_from_Q") {
    CHECK(epsilon_from_Q(Matrix::Identity(1, 1), Matrix::Zero(2, 2)) == 0.0);
    CHECK(epsilon_from_Q(Matrix::Identity(1, 1), Matrix::Identity(2, 2)) == doctest::Approx(std::sqrt(2.0)));
    CHECK_THROWS_AS(epsilon_from_Q(Matrix::Identity(1, 1), Matrix::Identity(3, 3)), DimensionError);
}

TEST_CASE("perfect initialization without noise gives zero") {
    const StochasticLti s = scalar_model(0.5);
    const PrecisionCertificate det =
        certify_deterministic(noiseless(s), make_matrix({{0.25}}), make_matrix({{0.25}}), Matrix::Zero(2, 2));
    CHECK(det.eps_x0 == 0.0);
    CHECK(det.eps_inf == 0.0);
    const PrecisionCertificate sto =
        certify_stochastic(s, make_matrix({{0.25}}), make_matrix({{0.25}}), make_vector({0}), make_vector({0}), 0);
    CHECK(sto.eps_x0 == 0.0);
    CHECK(sto.eps_inf == 0.0);
}

TEST_CASE("scalar chain: recursion supremum equals brute-force simulation") {
    const StochasticLti s = scalar_model(0.5);
    const Matrix k = make_matrix({{0.25}}), l = make_matrix({{0.25}});
    Vector xi0(2);
    xi0 << 1.0, 0.0;
    const PrecisionCertificate cert = certify_deterministic(noiseless(s), k, l, xi0 * xi0.transpose());
    // simulate ideal, plant and observer directly
    double xbar = 3.0, xhat = 4.0, x = 4.0, worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        worst = std::max(worst, std::abs(x - xbar));
        const double ubar = -0.1 * xbar;
        const double u = ubar + 0.25 * (xbar - xhat);
        const double y = x;
        xbar = 0.5 * xbar + ubar;
        x = 0.5 * x + u;
        xhat = 0.5 * xhat + u + 0.25 * (y - xhat);
    }
    CHECK(cert.eps_sup == doctest::Approx(worst).epsilon(1e-12));
    CHECK(cert.eps_x0 >= cert.eps_sup - 1e-9);
    CHECK(cert.eps_inf == 0.0);
    CHECK(cert.regime == Regime::deterministic);
}

TEST_CASE("case study: stationary and transient precision against references") {
    const CaseCerts& c = case_certs();
    for (int i = 0; i < 2; ++i) {
        const PrecisionCertificate& cert = c.cert[i];
        CHECK(cert.eps_inf == doctest::Approx(kEpsInf[i]).epsilon(1e-8));
        CHECK(cert.eps_sup == doctest::Approx(kEpsSup[i]).epsilon(1e-8));
        CHECK(cert.eps_x0 == doctest::Approx(kMinTrace[i]).epsilon(1e-5));
        CHECK(cert.eps_x0 >= kMinTrace[i] * (1 - 1e-7)); // a feasible point cannot beat the optimum
        CHECK(cert.eps_trajectory.front() == doctest::Approx(2.0));
        CHECK(cert.eps_inf <= cert.eps_x0);
        CHECK(cert.eps_sup <= cert.eps_x0 + 1e-9);
        CHECK(cert.eps_x0 == doctest::Approx(epsilon_from_Q(case_study_model().H, cert.Q)).epsilon(1e-12));
    }
    // stationary value of the moment recursion is the Lyapunov solution
    for (int i = 0; i < 2; ++i) {
        const double last = c.cert[i].eps_trajectory.back();
        CHECK(std::abs(last * last - c.cert[i].eps_inf * c.cert[i].eps_inf) <= 1e-8);
    }
    CHECK(c.cert[0].eps_inf < c.cert[1].eps_inf);
    CHECK(c.cert[0].eps_x0 < c.cert[1].eps_x0);
    CHECK(c.cert[0].lambda.has_value());
}

TEST_CASE("case study: emitted certificates satisfy both inequalities") {
    const CaseCerts& c = case_certs();
    const StochasticLti m = case_study_model();
    const Vector x = make_vector({16, 16, 0});
    for (int i = 0; i < 2; ++i) {
        const Matrix k = i == 0 ? c.K : Matrix::Zero(2, 3);
        const ErrorSystem es = error_dynamics(m, k, c.L);
        const Matrix w = noise_covariance_block(m, c.L);
        const Matrix q0 = initial_block(m, x, x, Regime::stochastic);
        const Matrix& q = c.cert[i].Q;
        CHECK(psd_dominates(q, q0, 1e-8));
        CHECK(psd_dominates(q, symmetrize(es.A_cl * q * es.A_cl.transpose() + w), 1e-8));
        CHECK(psd_dominates(q, c.cert[i].Q_inf, 1e-8));
    }
}

TEST_CASE("one-step preservation on sampled second moments") {
    const CaseCerts& c = case_certs();
    const StochasticLti m = case_study_model();
    const Matrix w = noise_covariance_block(m, c.L);
    std::mt19937_64 rng(42);
    for (int i = 0; i < 2; ++i) {
        const Matrix k = i == 0 ? c.K : Matrix::Zero(2, 3);
        const ErrorSystem es = error_dynamics(m, k, c.L);
        const Matrix& q = c.cert[i].Q;
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(q);
        const Matrix root = eig.operatorSqrt();
        const double tol = 1e-12 * q.norm();
        for (int s = 0; s < 100; ++s) {
            const Matrix g = testutil::random_matrix(rng, 6, 6);
            Matrix r = g * g.transpose();
            r /= Eigen::SelfAdjointEigenSolver<Matrix>(r).eigenvalues().maxCoeff();
            const Matrix mm = symmetrize(root * r * root); // M ⪯ Q
            REQUIRE(psd_dominates(q, mm, tol));
            CHECK(psd_dominates(q, symmetrize(es.A_cl * mm * es.A_cl.transpose() + w), tol));
        }
    }
}

TEST_CASE("minimal-trace witness on a scalar problem") {
    // min q s.t. q ≥ q0, q ≥ a²q + w  →  q = max(q0, w / (1 − a²))
    const Matrix h = make_matrix({{1.0}});
    for (const auto& [a, w, q0] : {std::array{0.5, 1.0, 0.0}, std::array{0.5, 1.0, 5.0}, std::array{0.9, 0.1, 0.3}}) {
        const WitnessResult r = min_trace_witness(make_matrix({{a}}), make_matrix({{w}}), make_matrix({{q0}}), h);
        const double expect = std::max(q0, w / (1 - a * a));
        CHECK(r.objective == doctest::Approx(expect).epsilon(1e-7));
        CHECK(r.objective >= expect * (1 - 1e-12));
        CHECK(r.dual_bound <= expect * (1 + 1e-12));
    }
}

TEST_CASE("deterministic hard bound along simulated trajectories") {
    StochasticLti m = case_study_model();
    m.F.setZero();
    m.E.setZero();
    const CaseCerts& c = case_certs();
    const DeterministicLti det = noiseless(m);
    const Vector xbar0 = make_vector({16, 16, 0});
    const Matrix q0 = initial_block(det, xbar0, xbar0);
    std::mt19937_64 rng(17);
    for (int i = 0; i < 2; ++i) {
        const Matrix k = i == 0 ? c.K : Matrix::Zero(2, 3);
        const PrecisionCertificate cert = certify_deterministic(det, k, c.L, q0, static_cast<InterfaceKind>(i));
        CHECK(cert.eps_x0 >= 2.0 - 1e-9);
        const ErrorSystem es = error_dynamics(m, k, c.L);
        const Eigen::LLT<Matrix> llt(cert.Q);
        REQUIRE(llt.info() == Eigen::Success);
        for (int s = 0; s < 5; ++s) {
            Vector xi = testutil::random_matrix(rng, 6, 1);
            xi /= std::sqrt(xi.dot(llt.solve(xi))) * (1 + 1e-12); // ξξᵀ ⪯ Q
            // the lifted unobservable block makes ‖Q‖ large, so the PSD test is relative
            REQUIRE(relation_check(cert.Q, Vector::Zero(3), xi.head(3), xi.head(3) + xi.tail(3),
                                   1e-12 * cert.Q.norm()));
            for (int t = 0; t <= 300; ++t) {
                CHECK((es.H_tilde * xi).norm() <= cert.eps_x0 + 1e-9);
                xi = es.A_cl * xi;
            }
        }
    }
}

TEST_CASE("relation checks") {
    const Vector z = make_vector({1.0});
    CHECK(relation_check(Matrix::Zero(2, 2), z, z, z, 1e-12));
    CHECK_FALSE(relation_check(Matrix::Identity(2, 2), make_vector({0}), make_vector({2}), make_vector({2}), 1e-12));
    CHECK(relation_check_moment(Matrix::Identity(2, 2), 0.5 * Matrix::Identity(2, 2), 0.0));
    CHECK_THROWS_AS(relation_check(Matrix::Identity(2, 2), z, make_vector({1, 2}), z, 0.0), DimensionError);
}

TEST_CASE("moment recursion cap is an error, not a truncation") {
    const Matrix a = make_matrix({{0.9999}});
    CHECK_THROWS_AS(moment_recursion(a, make_matrix({{1.0}}), Matrix::Zero(1, 1), make_matrix({{1.0}}), 0),
                    ConvergenceError);
}

TEST_CASE("unstable gains are rejected") {
    const StochasticLti m = case_study_model();
    const Vector x = make_vector({16, 16, 0});
    const Matrix bad_l = make_matrix({{-20, 0}, {0, 0}, {0, -20}});
    CHECK_THROWS_AS(certify_stochastic(m, Matrix::Zero(2, 3), bad_l, x, x, 0), InstabilityError);
}
