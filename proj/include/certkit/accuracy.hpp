#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "certkit/matops.hpp"
#include "certkit/model.hpp"
#include "certkit/refine.hpp"

namespace certkit {

enum class Regime : std::uint8_t { deterministic, stochastic };

const char* to_string(Regime regime);

/// Precision certificate for the deviation ‖z − z̄‖₂ between the ideal and the deployed loop.
///
/// `Q` is the minimal-trace matrix satisfying both certificate inequalities
///   Q ⪰ Q0   and   Q ⪰ A_cl Q A_clᵀ + W,
/// and eps_x0 = sqrt(trace(H̃ Q H̃ᵀ)). eps_inf is the same quantity for the stationary
/// solution of Q = A_cl Q A_clᵀ + W. eps_sup is the supremum over t of the exact
/// second-moment recursion, which is the tightest time-indexed bound and never exceeds eps_x0.
struct PrecisionCertificate {
    Matrix Q;
    Matrix Q_inf;
    double eps_x0 = 0.0;
    double eps_inf = 0.0;
    double eps_sup = 0.0;
    /// max(1, smallest λ with M(t) ⪯ λ Q_inf over the recursion); empty if Q_inf is singular.
    std::optional<double> lambda;
    Regime regime = Regime::stochastic;
    InterfaceKind interface = InterfaceKind::sensor_based;
    std::size_t horizon_used = 0;
    /// sqrt(trace(H̃ M(t) H̃ᵀ)) for t = 0 .. horizon_used.
    std::vector<double> eps_trajectory;
    double duality_gap = 0.0;
};

/// W = [[LEEᵀLᵀ, −LEEᵀLᵀ], [−LEEᵀLᵀ, FFᵀ + LEEᵀLᵀ]] (equals G Gᵀ of the error system).
Matrix noise_covariance_block(const StochasticLti& m, const Matrix& l);

/// Stochastic: blockdiag((x̂0−x̄0)(x̂0−x̄0)ᵀ, (x0−x̂0)(x0−x̂0)ᵀ + P0).
/// Deterministic: v vᵀ with v = [x̂0 − x̄0; x0 − x̂0].
Matrix initial_block(const StochasticLti& m, const Vector& xbar0, const Vector& xhat0, Regime regime);
Matrix initial_block(const DeterministicLti& m, const Vector& xbar0, const Vector& xhat0);

/// sqrt(trace([H H] Q [H H]ᵀ))
double epsilon_from_Q(const Matrix& h, const Matrix& q);

struct MomentRecursion {
    std::vector<double> eps; // per t
    double eps_sup = 0.0;
    std::optional<double> lambda;
    std::size_t horizon = 0;
};

/// M(t+1) = A_cl M(t) A_clᵀ + W from M(0) = Q0. Runs at least `min_horizon` steps, then until
/// the output trace changes by less than 1e-9 for 10 consecutive steps (and, when `limit`
/// is given, sits within 1e-9 of it). Throws ConvergenceError past 10'000 steps.
MomentRecursion moment_recursion(const Matrix& a_cl, const Matrix& w, const Matrix& q0,
                                 const Matrix& h_tilde, std::size_t min_horizon,
                                 const Matrix* q_inf = nullptr);

struct WitnessResult {
    Matrix Q;
    double objective = 0.0;  // trace(H̃ Q H̃ᵀ)
    double dual_bound = 0.0; // lower bound on the optimum
    std::size_t newton_steps = 0;
};

/// Minimizes trace(H̃ Q H̃ᵀ) subject to Q ⪰ Q0 and Q ⪰ A Q Aᵀ + W with a log-barrier
/// Newton method. The returned Q is strictly feasible.
WitnessResult min_trace_witness(const Matrix& a_cl, const Matrix& w, const Matrix& q0,
                                const Matrix& h_tilde, double rel_gap = 1e-9);

PrecisionCertificate certify_deterministic(const DeterministicLti& m, const Matrix& k, const Matrix& l,
                                           const Matrix& q0,
                                           InterfaceKind interface = InterfaceKind::sensor_based);

/// `k` is the interface gain (zero matrix for feedforward).
PrecisionCertificate certify_stochastic(const StochasticLti& m, const Matrix& k, const Matrix& l,
                                        const Vector& xbar0, const Vector& xhat0, std::size_t horizon,
                                        InterfaceKind interface = InterfaceKind::sensor_based);

/// v vᵀ ⪯ Q with v = [x̂ − x̄; x − x̂]
bool relation_check(const Matrix& q, const Vector& xbar, const Vector& xhat, const Vector& x, double tol);
/// M ⪯ Q
bool relation_check_moment(const Matrix& q, const Matrix& m, double tol);

} // namespace certkit
