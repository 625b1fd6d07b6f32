#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "certkit/errors.hpp"

namespace certkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Builds a matrix from nested rows. Rejects ragged input and non-finite entries.
Matrix make_matrix(const std::vector<std::vector<double>>& rows);
Vector make_vector(const std::vector<double>& values);

/// Throws DimensionError unless every entry of `m` is finite.
void require_finite(const Matrix& m, std::string_view what);
void require_square(const Matrix& m, std::string_view what);
void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, std::string_view what);

struct SolverReport {
    std::size_t iterations = 0;
    double residual_norm = 0.0; // Frobenius norm of the equation defect
    bool converged = false;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, SolverReport report)
        : Error(what), report_(report) {}
    const SolverReport& report() const noexcept { return report_; }

private:
    SolverReport report_;
};

struct SolverOptions {
    double tol = 1e-10;
    std::size_t max_iter = 10'000;
};

/// Largest eigenvalue magnitude, estimated from ‖A^(2^k)‖^(1/2^k) with
/// rescaled repeated squaring. Always an upper estimate that converges to ρ(A).
double spectral_radius(const Matrix& a);

struct SymmetricEigen {
    Vector values;  // ascending
    Matrix vectors; // columns are eigenvectors
};

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix (upper triangle is used).
SymmetricEigen symmetric_eigen(const Matrix& s);
double min_symmetric_eigenvalue(const Matrix& s);

struct LyapunovSolution {
    Matrix Q;
    SolverReport report;
};

/// Solves Q = A Q Aᵀ + W by doubling: A ← A², Q ← Q + A Q Aᵀ.
LyapunovSolution solve_discrete_lyapunov(const Matrix& a, const Matrix& w, SolverOptions opts = {});

struct KalmanSolution {
    Matrix P;
    Matrix L;
    SolverReport report;
};

/// Filter Riccati fixed point P = APAᵀ − APCᵀ(CPCᵀ+EEᵀ)⁻¹CPAᵀ + FFᵀ iterated from P = 0,
/// and the predictor gain L = APCᵀ(CPCᵀ+EEᵀ)⁻¹.
KalmanSolution solve_dare_kalman(const Matrix& a, const Matrix& c, const Matrix& f, const Matrix& e,
                                 SolverOptions opts = {});

struct LqSolution {
    Matrix S;
    Matrix K;
    SolverReport report;
};

/// Control Riccati fixed point S = AᵀSA − AᵀSB(BᵀSB + D_HᵀD_H)⁻¹BᵀSA + HᵀH and
/// K = (BᵀSB + D_HᵀD_H)⁻¹BᵀSA. An empty `d_h` means no input weight.
LqSolution solve_dare_lq(const Matrix& a, const Matrix& b, const Matrix& h, const Matrix& d_h,
                         SolverOptions opts = {});

/// True iff λ_min(Q − M) ≥ −tol. Inputs must be symmetric within tol.
bool psd_dominates(const Matrix& q, const Matrix& m, double tol);

/// Smallest λ ≥ 0 with M ⪯ λQ for positive definite Q.
double min_dominating_scale(const Matrix& q, const Matrix& m);

Matrix symmetrize(const Matrix& m);

} // namespace certkit
