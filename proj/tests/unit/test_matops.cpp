#include "doctest.h"

#include <cmath>
#include <random>

#include "certkit/matops.hpp"
#include "certkit/model.hpp"
#include "helpers.hpp"

using namespace certkit;

namespace {

Matrix lyapunov_series(const Matrix& a, const Matrix& w) {
    Matrix sum = Matrix::Zero(a.rows(), a.cols());
    Matrix term = w;
    for (int k = 0; k < 100000 && term.norm() > 1e-15 * (1.0 + sum.norm()); ++k) {
        sum += term;
        term = a * term * a.transpose();
    }
    return sum;
}

// Positive root of c²P² + (e² − f²c² − a²e²)P − f²e² = 0.
double scalar_riccati(double a, double c, double f, double e) {
    const double b = e * e - f * f * c * c - a * a * e * e;
    return (-b + std::sqrt(b * b + 4.0 * c * c * f * f * e * e)) / (2.0 * c * c);
}

} // namespace

TEST_CASE("make_matrix rejects ragged and non-finite input") {
    CHECK_THROWS_AS(make_matrix({{1, 2}, {3}}), DimensionError);
    CHECK_THROWS_AS(make_matrix({{1, NAN}}), DimensionError);
    CHECK_THROWS_AS(make_vector({INFINITY}), DimensionError);
    const Matrix m = make_matrix({{1, 2}, {3, 4}});
    CHECK(m(1, 0) == 3.0);
}

TEST_CASE("spectral radius") {
    CHECK(spectral_radius(Matrix::Zero(3, 3)) == 0.0);
    CHECK(spectral_radius(make_matrix({{0.5}})) == doctest::Approx(0.5));
    // complex pair 0.9·e^{±iπ/4}
    const double c = 0.9 * std::cos(M_PI / 4), s = 0.9 * std::sin(M_PI / 4);
    CHECK(spectral_radius(make_matrix({{c, -s}, {s, c}})) == doctest::Approx(0.9).epsilon(1e-10));
    // Jordan block: transient growth, radius still 0.5
    CHECK(spectral_radius(make_matrix({{0.5, 100}, {0, 0.5}})) == doctest::Approx(0.5).epsilon(1e-6));
    std::mt19937_64 rng(7);
    for (int i = 0; i < 20; ++i) {
        const Matrix a = testutil::random_matrix(rng, 5, 5);
        CHECK(spectral_radius(a) == doctest::Approx(testutil::eig_radius(a)).epsilon(1e-6));
    }
}

TEST_CASE("symmetric eigen decomposition") {
    std::mt19937_64 rng(11);
    const Matrix g = testutil::random_matrix(rng, 6, 6);
    const Matrix s = g + g.transpose();
    const SymmetricEigen e = symmetric_eigen(s);
    const Vector ref = Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues();
    CHECK((e.values - ref).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((e.vectors * e.values.asDiagonal() * e.vectors.transpose() - s).norm() < 1e-10);
    CHECK(min_symmetric_eigenvalue(s) == doctest::Approx(ref(0)));
}

TEST_CASE("Lyapunov doubling against the truncated series on 50 seeded stable matrices") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 50; ++i) {
        const Eigen::Index n = 2 + i % 5;
        const Matrix a = testutil::random_stable(rng, n, 0.3 + 0.6 * (i % 7) / 6.0);
        const Matrix g = testutil::random_matrix(rng, n, n);
        const Matrix w = g * g.transpose();
        const LyapunovSolution sol = solve_discrete_lyapunov(a, w);
        CHECK(sol.report.converged);
        CHECK((sol.Q - lyapunov_series(a, w)).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((sol.Q - a * sol.Q * a.transpose() - w).norm() <= 1e-8);
    }
}

TEST_CASE("Lyapunov: scalar, scaling and instability") {
    CHECK(solve_discrete_lyapunov(make_matrix({{0.5}}), make_matrix({{1}})).Q(0, 0) == doctest::Approx(4.0 / 3.0));
    std::mt19937_64 rng(5);
    const Matrix a = testutil::random_stable(rng, 3, 0.8);
    const Matrix g = testutil::random_matrix(rng, 3, 3);
    const Matrix w = g * g.transpose();
    const Matrix q1 = solve_discrete_lyapunov(a, w).Q;
    const Matrix q3 = solve_discrete_lyapunov(a, 3.0 * w).Q;
    CHECK((q3 - 3.0 * q1).norm() < 1e-8 * q3.norm());
    CHECK_THROWS_AS(solve_discrete_lyapunov(make_matrix({{1.0}}), make_matrix({{1}})), InstabilityError);
    CHECK_THROWS_AS(solve_discrete_lyapunov(make_matrix({{1, 2}}), make_matrix({{1}})), DimensionError);
}

TEST_CASE("scalar Riccati equations match the closed-form root") {
    for (const auto& [a, c, f, e] : {std::array{0.9, 1.0, 0.3, 0.2}, std::array{1.2, 0.5, 1.0, 1.0},
                                     std::array{0.5, 2.0, 0.1, 0.7}}) {
        const KalmanSolution kal =
            solve_dare_kalman(make_matrix({{a}}), make_matrix({{c}}), make_matrix({{f}}), make_matrix({{e}}));
        const double p = scalar_riccati(a, c, f, e);
        CHECK(kal.P(0, 0) == doctest::Approx(p).epsilon(1e-9));
        CHECK(kal.L(0, 0) == doctest::Approx(a * p * c / (c * c * p + e * e)).epsilon(1e-9));
        CHECK(std::abs(a - kal.L(0, 0) * c) < 1.0);

        // the LQ equation has the same scalar form with (c, e, f) → (b, d, h)
        const LqSolution lq = solve_dare_lq(make_matrix({{a}}), make_matrix({{c}}), make_matrix({{f}}),
                                            make_matrix({{e}}));
        const double s = scalar_riccati(a, c, f, e);
        CHECK(lq.S(0, 0) == doctest::Approx(s).epsilon(1e-9));
        CHECK(lq.K(0, 0) == doctest::Approx(c * s * a / (c * c * s + e * e)).epsilon(1e-9));
    }
}

TEST_CASE("LQ without input weight is deadbeat") {
    const LqSolution lq = solve_dare_lq(make_matrix({{0.9}}), make_matrix({{2.0}}), make_matrix({{1.0}}), Matrix());
    CHECK(lq.S(0, 0) == doctest::Approx(1.0));
    CHECK(lq.K(0, 0) == doctest::Approx(0.45));
    // H = 0 with an input weight: nothing to regulate
    const LqSolution zero = solve_dare_lq(make_matrix({{0.9}}), make_matrix({{2.0}}), make_matrix({{0.0}}),
                                          make_matrix({{1.0}}));
    CHECK(zero.K.norm() == 0.0);
    CHECK_THROWS_AS(solve_dare_lq(make_matrix({{0.9}}), make_matrix({{2.0}}), make_matrix({{0.0}}), Matrix()),
                    SingularityError);
}

TEST_CASE("case-study gains match the printed matrices and their defining equations") {
    const StochasticLti m = case_study_model();
    const KalmanSolution kal = solve_dare_kalman(m.A, m.C, m.F, m.E);
    const LqSolution lq = solve_dare_lq(m.A, m.B, m.H, Matrix());
    const Matrix l_printed = make_matrix({{0.52007, 0.03333}, {-0.22386, 0.02625}, {0.00215, 0.81963}});
    const Matrix k_printed = make_matrix({{13.4231, 0.9615, 0.5769}, {1.0417, 14.625, 0.4167}});
    CHECK((kal.L - l_printed).cwiseAbs().maxCoeff() < 1e-3);
    CHECK((lq.K - k_printed).cwiseAbs().maxCoeff() < 1e-3);

    const Matrix& p = kal.P;
    const Matrix sp = m.C * p * m.C.transpose() + m.E * m.E.transpose();
    const Matrix p_next = m.A * p * m.A.transpose() -
                          m.A * p * m.C.transpose() * sp.inverse() * m.C * p * m.A.transpose() +
                          m.F * m.F.transpose();
    CHECK((p_next - p).norm() <= 1e-8);
    const Matrix& s = lq.S;
    const Matrix bsb = m.B.transpose() * s * m.B;
    const Matrix s_next = m.A.transpose() * s * m.A -
                          m.A.transpose() * s * m.B * bsb.inverse() * m.B.transpose() * s * m.A +
                          m.H.transpose() * m.H;
    CHECK((s_next - s).norm() <= 1e-8);
    CHECK(kal.report.converged);
    CHECK(kal.report.residual_norm <= 1e-10);
    CHECK(testutil::eig_radius(m.A - kal.L * m.C) < 1.0);
    CHECK(testutil::eig_radius(m.A - m.B * lq.K) < 1.0);
}

TEST_CASE("Kalman solver reports a non-detectable pair") {
    // unstable mode invisible to C
    CHECK_THROWS(solve_dare_kalman(make_matrix({{1.5, 0}, {0, 0.5}}), make_matrix({{0, 1}}),
                                   Matrix::Identity(2, 2), make_matrix({{1}})));
}

TEST_CASE("PSD dominance and dominating scale") {
    CHECK(psd_dominates(Matrix::Identity(2, 2), Matrix::Zero(2, 2), 0.0));
    CHECK_FALSE(psd_dominates(Matrix::Identity(2, 2), make_matrix({{4, 0}, {0, 0}}), 1e-12));
    CHECK(psd_dominates(make_matrix({{2, 1}, {1, 2}}), make_matrix({{1, 1}, {1, 1}}), 1e-12));
    CHECK_THROWS_AS(psd_dominates(make_matrix({{1, 2}, {0, 1}}), Matrix::Zero(2, 2), 1e-12), ShapeError);
    const Matrix q = make_matrix({{2, 0}, {0, 1}});
    const Matrix mm = make_matrix({{1, 0}, {0, 3}});
    const double lam = min_dominating_scale(q, mm);
    CHECK(lam == doctest::Approx(3.0));
    CHECK(psd_dominates(lam * q, mm, 1e-12));
    CHECK_THROWS_AS(min_dominating_scale(make_matrix({{1, 0}, {0, 0}}), mm), SingularityError);
}
