#include "certkit/accuracy.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace certkit {

const char* to_string(Regime regime) {
    return regime == Regime::deterministic ? "deterministic" : "stochastic";
}

Matrix noise_covariance_block(const StochasticLti& m, const Matrix& l) {
    const auto n = m.states();
    require_shape(l, n, m.measurements(), "L");
    const Matrix le = l * m.E;
    const Matrix lel = le * le.transpose();
    Matrix w(2 * n, 2 * n);
    w << lel, -lel, -lel, m.F * m.F.transpose() + lel;
    return w;
}

Matrix initial_block(const StochasticLti& m, const Vector& xbar0, const Vector& xhat0, Regime regime) {
    const auto n = m.states();
    if (xbar0.size() != n || xhat0.size() != n) {
        throw DimensionError("initial_block: x̄0 and x̂0 must be model-sized");
    }
    const Vector delta = xhat0 - xbar0;
    const Vector err = m.x0 - xhat0;
    if (regime == Regime::deterministic) {
        Vector v(2 * n);
        v << delta, err;
        return v * v.transpose();
    }
    Matrix q0 = Matrix::Zero(2 * n, 2 * n);
    q0.topLeftCorner(n, n) = delta * delta.transpose();
    q0.bottomRightCorner(n, n) = err * err.transpose() + m.P0;
    return q0;
}

Matrix initial_block(const DeterministicLti& m, const Vector& xbar0, const Vector& xhat0) {
    StochasticLti s{m.A, m.B, m.C, m.H, Matrix::Zero(m.states(), 0), Matrix::Zero(m.C.rows(), 0),
                    m.x0, Matrix::Zero(m.states(), m.states())};
    return initial_block(s, xbar0, xhat0, Regime::deterministic);
}

double epsilon_from_Q(const Matrix& h, const Matrix& q) {
    require_shape(q, 2 * h.cols(), 2 * h.cols(), "Q");
    Matrix ht(h.rows(), 2 * h.cols());
    ht << h, h;
    return std::sqrt(std::max(0.0, (ht * q * ht.transpose()).trace()));
}

namespace {

double output_trace(const Matrix& h_tilde, const Matrix& m) {
    return (h_tilde * m * h_tilde.transpose()).trace();
}

bool is_positive_definite(const Matrix& q) {
    if (q.size() == 0) {
        return false;
    }
    return min_symmetric_eigenvalue(q) > 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff());
}

} // namespace

MomentRecursion moment_recursion(const Matrix& a_cl, const Matrix& w, const Matrix& q0,
                                 const Matrix& h_tilde, std::size_t min_horizon, const Matrix* q_inf) {
    constexpr std::size_t kCap = 10'000;
    constexpr double kStep = 1e-9;
    MomentRecursion out;
    const bool track_lambda = q_inf != nullptr && is_positive_definite(*q_inf);
    double lambda = 1.0;
    const double limit = q_inf != nullptr ? output_trace(h_tilde, *q_inf) : 0.0;

    Matrix m = q0;
    double prev = output_trace(h_tilde, m);
    out.eps.push_back(std::sqrt(std::max(0.0, prev)));
    std::size_t quiet = 0;
    std::size_t t = 0;
    for (;;) {
        if (track_lambda) {
            lambda = std::max(lambda, min_dominating_scale(*q_inf, m));
        }
        if (t >= min_horizon && quiet >= 10 &&
            (q_inf == nullptr || std::abs(prev - limit) <= kStep * std::max(1.0, limit))) {
            break;
        }
        if (t >= kCap) {
            SolverReport report{t, std::abs(prev - limit), false};
            throw ConvergenceError("moment recursion did not settle within 10000 steps", report);
        }
        m = symmetrize(a_cl * m * a_cl.transpose() + w);
        ++t;
        const double tr = output_trace(h_tilde, m);
        quiet = std::abs(tr - prev) < kStep ? quiet + 1 : 0;
        prev = tr;
        out.eps.push_back(std::sqrt(std::max(0.0, tr)));
    }
    out.horizon = t;
    for (double e : out.eps) {
        out.eps_sup = std::max(out.eps_sup, e);
    }
    if (track_lambda) {
        out.lambda = lambda;
    }
    return out;
}

namespace {

// Symmetric basis E_k for the upper triangle (i ≤ j).
struct SymBasis {
    explicit SymBasis(Eigen::Index n) : n(n) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i; j < n; ++j) {
                idx.emplace_back(i, j);
            }
        }
    }
    Eigen::Index size() const { return static_cast<Eigen::Index>(idx.size()); }
    Matrix element(Eigen::Index k) const {
        Matrix e = Matrix::Zero(n, n);
        const auto [i, j] = idx[static_cast<std::size_t>(k)];
        e(i, j) = 1.0;
        e(j, i) = 1.0;
        return e;
    }
    Matrix to_matrix(const Vector& q) const {
        Matrix out(n, n);
        for (Eigen::Index k = 0; k < size(); ++k) {
            const auto [i, j] = idx[static_cast<std::size_t>(k)];
            out(i, j) = q(k);
            out(j, i) = q(k);
        }
        return out;
    }
    Vector to_vector(const Matrix& m) const {
        Vector q(size());
        for (Eigen::Index k = 0; k < size(); ++k) {
            const auto [i, j] = idx[static_cast<std::size_t>(k)];
            q(k) = 0.5 * (m(i, j) + m(j, i));
        }
        return q;
    }

    Eigen::Index n;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> idx;
};

// L⁻¹ X L⁻ᵀ for G = LLᵀ.
Matrix scaled(const Eigen::LLT<Matrix>& llt, const Matrix& x) {
    const Matrix left = llt.matrixL().solve(x);
    return llt.matrixL().solve(left.transpose());
}

// −log det of a matrix, +inf unless positive definite.
double neg_log_det(const Matrix& g) {
    Eigen::LLT<Matrix> llt(g);
    if (llt.info() != Eigen::Success) {
        return std::numeric_limits<double>::infinity();
    }
    const Vector d = Matrix(llt.matrixL()).diagonal();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (!(d(i) > 0.0)) {
            return std::numeric_limits<double>::infinity();
        }
        sum += std::log(d(i));
    }
    return -2.0 * sum;
}

} // namespace

namespace {

struct BarrierResult {
    Matrix Q;
    double gap = 0.0;
    std::size_t newton_steps = 0;
};

// Log-barrier Newton method for min ⟨C, Q⟩ s.t. Q ⪰ Q0, Q ⪰ A Q Aᵀ + W. Needs (A, C)
// observable so the central path is bounded.
BarrierResult barrier_solve(const Matrix& a, const Matrix& w, const Matrix& q0, const Matrix& cost,
                            double rel_gap) {
    const auto n = a.rows();
    const SymBasis basis(n);
    const Eigen::Index nv = basis.size();
    std::vector<Matrix> e(static_cast<std::size_t>(nv)), d(static_cast<std::size_t>(nv));
    Vector c(nv);
    for (Eigen::Index k = 0; k < nv; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        e[ks] = basis.element(k);
        d[ks] = e[ks] - a * e[ks] * a.transpose();
        c(k) = cost.cwiseProduct(e[ks]).sum();
    }

    // Strictly feasible start: s · lyap(A, W + σI) with s ≥ 1 large enough to dominate Q0.
    const double sigma = std::max({w.norm(), q0.norm(), 1e-12}) / static_cast<double>(n);
    const Matrix q_lyap =
        solve_discrete_lyapunov(a, w + sigma * Matrix::Identity(n, n), {1e-12 * std::max(1.0, sigma), 10'000}).Q;
    const double s = std::max(1.0, 2.0 * min_dominating_scale(q_lyap, q0));
    Vector q = basis.to_vector(s * q_lyap);

    auto constraint1 = [&](const Matrix& qm) { return symmetrize(qm - q0); };
    auto constraint2 = [&](const Matrix& qm) { return symmetrize(qm - a * qm * a.transpose() - w); };
    auto barrier = [&](const Vector& qv, double t) {
        const Matrix qm = basis.to_matrix(qv);
        return t * c.dot(qv) + neg_log_det(constraint1(qm)) + neg_log_det(constraint2(qm));
    };

    BarrierResult out;
    const double m_barrier = 2.0 * static_cast<double>(n); // total barrier degree
    double t = m_barrier / std::max(c.dot(q), 1e-300);
    const auto nn = n * n;
    for (int outer = 0; outer < 100; ++outer) {
        for (int inner = 0; inner < 200; ++inner) {
            // Hessian = JᵀJ with columns vec(L⁻¹ E_k L⁻ᵀ) for G = LLᵀ; solving through a QR
            // of J keeps the step usable when active constraints make G ill-conditioned.
            const Matrix qm = basis.to_matrix(q);
            const Eigen::LLT<Matrix> llt1(constraint1(qm));
            const Eigen::LLT<Matrix> llt2(constraint2(qm));
            Matrix jac(2 * nn, nv);
            Vector grad(nv);
            for (Eigen::Index k = 0; k < nv; ++k) {
                const auto ks = static_cast<std::size_t>(k);
                const Matrix u1 = scaled(llt1, e[ks]);
                const Matrix u2 = scaled(llt2, d[ks]);
                jac.col(k).head(nn) = Eigen::Map<const Vector>(u1.data(), nn);
                jac.col(k).tail(nn) = Eigen::Map<const Vector>(u2.data(), nn);
                grad(k) = t * c(k) - u1.trace() - u2.trace();
            }
            const Eigen::HouseholderQR<Matrix> qr(jac);
            const Matrix r = qr.matrixQR().topRows(nv).triangularView<Eigen::Upper>();
            const Vector y = r.transpose().triangularView<Eigen::Lower>().solve(-grad);
            const Vector dir = r.triangularView<Eigen::Upper>().solve(y);
            const double decrement = y.squaredNorm();
            ++out.newton_steps;
            if (!(decrement > 1e-10)) {
                break;
            }
            const double f0 = barrier(q, t);
            double step = 1.0;
            while (step > 1e-12 && !(barrier(q + step * dir, t) <= f0 - 0.25 * step * decrement)) {
                step *= 0.5;
            }
            if (step <= 1e-12) {
                break;
            }
            q += step * dir;
        }
        out.gap = m_barrier / t;
        if (out.gap <= rel_gap * std::max(c.dot(q), 1e-14)) {
            break;
        }
        t *= 10.0;
    }
    out.Q = basis.to_matrix(q);
    return out;
}

} // namespace

WitnessResult min_trace_witness(const Matrix& a_cl, const Matrix& w, const Matrix& q0,
                                const Matrix& h_tilde, double rel_gap) {
    require_square(a_cl, "A_cl");
    const auto n = a_cl.rows();
    require_shape(w, n, n, "W");
    require_shape(q0, n, n, "Q0");
    if (h_tilde.cols() != n) {
        throw DimensionError("min_trace_witness: H̃ must have one column per error state");
    }
    WitnessResult out;
    if (w.isZero(0.0) && q0.isZero(0.0)) {
        out.Q = Matrix::Zero(n, n);
        return out;
    }

    // Orthogonal split into the observable subspace of (A_cl, H̃) and its complement. The
    // unobservable part is A_cl-invariant, so in these coordinates A = [[A_oo, 0], [A_uo, A_uu]]
    // and the output trace only depends on the observable block.
    Matrix obs(h_tilde.rows() * n, n);
    Matrix power = h_tilde;
    for (Eigen::Index k = 0; k < n; ++k) {
        obs.middleRows(k * h_tilde.rows(), h_tilde.rows()) = power;
        power = (power * a_cl).eval();
    }
    const SymmetricEigen gram = symmetric_eigen(obs.transpose() * obs);
    const double gram_tol = 1e-10 * std::max(gram.values.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::Index n_unobs = 0;
    while (n_unobs < n && gram.values(n_unobs) <= gram_tol) {
        ++n_unobs;
    }
    const Eigen::Index n_obs = n - n_unobs;
    Matrix basis(n, n);
    basis << gram.vectors.rightCols(n_obs), gram.vectors.leftCols(n_unobs);

    const Matrix at = basis.transpose() * a_cl * basis;
    const Matrix wt = symmetrize(basis.transpose() * w * basis);
    const Matrix q0t = symmetrize(basis.transpose() * q0 * basis);
    const Matrix ht = h_tilde * basis;

    Matrix q_obs(n_obs, n_obs);
    if (n_obs > 0) {
        const Matrix a_oo = at.topLeftCorner(n_obs, n_obs);
        const Matrix h_o = ht.leftCols(n_obs);
        const BarrierResult res = barrier_solve(a_oo, wt.topLeftCorner(n_obs, n_obs),
                                                q0t.topLeftCorner(n_obs, n_obs), h_o.transpose() * h_o,
                                                rel_gap);
        q_obs = res.Q;
        out.newton_steps = res.newton_steps;
        out.dual_bound = (h_o * q_obs * h_o.transpose()).trace() - res.gap;
    }

    Matrix qt = Matrix::Zero(n, n);
    qt.topLeftCorner(n_obs, n_obs) = q_obs;
    if (n_unobs > 0) {
        // Lift with μ·P_u on the unobservable block, μ just large enough for strict feasibility.
        // The infimum is not attained: as Q_o approaches the boundary, μ blows up. Back Q_o off
        // into the interior by δ·lyap(A_oo, I), costing a 1e-6 relative increase in the trace.
        if (n_obs > 0) {
            const Matrix a_oo = at.topLeftCorner(n_obs, n_obs);
            const Matrix h_o = ht.leftCols(n_obs);
            const Matrix p_o = solve_discrete_lyapunov(a_oo, Matrix::Identity(n_obs, n_obs)).Q;
            const double obj = (h_o * q_obs * h_o.transpose()).trace();
            const double unit = (h_o * p_o * h_o.transpose()).trace();
            q_obs += (1e-6 * std::max(obj, 1e-12) / unit) * p_o;
            qt.topLeftCorner(n_obs, n_obs) = q_obs;
        }
        const Matrix a_uu = at.bottomRightCorner(n_unobs, n_unobs);
        const Matrix a_uo = at.bottomLeftCorner(n_unobs, n_obs);
        const Matrix p_u = solve_discrete_lyapunov(a_uu, Matrix::Identity(n_unobs, n_unobs)).Q;

        Matrix need1 = q0t.bottomRightCorner(n_unobs, n_unobs);
        Matrix need2 = a_uo * q_obs * a_uo.transpose() + wt.bottomRightCorner(n_unobs, n_unobs);
        if (n_obs > 0) {
            const Matrix g1 = symmetrize(q_obs - q0t.topLeftCorner(n_obs, n_obs));
            const Matrix c1 = q0t.topRightCorner(n_obs, n_unobs);
            need1 += c1.transpose() * g1.ldlt().solve(c1);
            const Matrix a_oo = at.topLeftCorner(n_obs, n_obs);
            const Matrix g2 = symmetrize(q_obs - a_oo * q_obs * a_oo.transpose() -
                                         wt.topLeftCorner(n_obs, n_obs));
            const Matrix c2 = -a_oo * q_obs * a_uo.transpose() - wt.topRightCorner(n_obs, n_unobs);
            need2 += c2.transpose() * g2.ldlt().solve(c2);
        }
        // G1_uu = μP_u − need1 and G2_uu = μ(P_u − A_uu P_u A_uuᵀ) − need2 = μI − need2.
        const double mu1 = min_dominating_scale(p_u, symmetrize(need1));
        const double mu2 = std::max(0.0, symmetric_eigen(symmetrize(need2)).values.maxCoeff());
        const double mu = 1.01 * std::max({mu1, mu2, 0.0}) + 1e-9 * std::max(1.0, q0.norm() + w.norm());
        qt.bottomRightCorner(n_unobs, n_unobs) = mu * p_u;
    }

    out.Q = symmetrize(basis * qt * basis.transpose());
    out.objective = (h_tilde * out.Q * h_tilde.transpose()).trace();
    return out;
}

namespace {

void require_stable_gains(const StochasticLti& m, const Matrix& k, const Matrix& l) {
    const double rho_k = spectral_radius(m.A - m.B * k);
    if (rho_k >= 1.0) {
        throw InstabilityError("A-BK is not stable, spectral radius " + std::to_string(rho_k), rho_k);
    }
    const double rho_l = spectral_radius(m.A - l * m.C);
    if (rho_l >= 1.0) {
        throw InstabilityError("A-LC is not stable, spectral radius " + std::to_string(rho_l), rho_l);
    }
}

PrecisionCertificate certify(const StochasticLti& m, const Matrix& k, const Matrix& l, const Matrix& q0,
                             std::size_t horizon, Regime regime, InterfaceKind interface) {
    require_stable_gains(m, k, l);
    const ErrorSystem es = error_dynamics(m, k, l);
    const Matrix w = noise_covariance_block(m, l);
    require_shape(q0, es.A_cl.rows(), es.A_cl.cols(), "Q0");

    PrecisionCertificate cert;
    cert.regime = regime;
    cert.interface = interface;
    cert.Q_inf = w.isZero(0.0) ? Matrix::Zero(w.rows(), w.cols()) : solve_discrete_lyapunov(es.A_cl, w).Q;
    cert.eps_inf = epsilon_from_Q(m.H, cert.Q_inf);

    const MomentRecursion rec = moment_recursion(es.A_cl, w, q0, es.H_tilde, horizon, &cert.Q_inf);
    cert.eps_trajectory = rec.eps;
    cert.eps_sup = rec.eps_sup;
    cert.lambda = rec.lambda;
    cert.horizon_used = rec.horizon;

    const WitnessResult witness = min_trace_witness(es.A_cl, w, q0, es.H_tilde);
    cert.Q = witness.Q;
    cert.eps_x0 = epsilon_from_Q(m.H, cert.Q);
    cert.duality_gap = std::max(0.0, witness.objective - witness.dual_bound);
    return cert;
}

} // namespace

PrecisionCertificate certify_deterministic(const DeterministicLti& m, const Matrix& k, const Matrix& l,
                                           const Matrix& q0, InterfaceKind interface) {
    m.validate();
    const auto n = m.states();
    StochasticLti s{m.A, m.B, m.C, m.H, Matrix::Zero(n, 0), Matrix::Zero(m.C.rows(), 0), m.x0,
                    Matrix::Zero(n, n)};
    return certify(s, k, l, q0, 0, Regime::deterministic, interface);
}

PrecisionCertificate certify_stochastic(const StochasticLti& m, const Matrix& k, const Matrix& l,
                                        const Vector& xbar0, const Vector& xhat0, std::size_t horizon,
                                        InterfaceKind interface) {
    m.validate();
    const Matrix q0 = initial_block(m, xbar0, xhat0, Regime::stochastic);
    return certify(m, k, l, q0, horizon, Regime::stochastic, interface);
}

bool relation_check(const Matrix& q, const Vector& xbar, const Vector& xhat, const Vector& x, double tol) {
    if (xbar.size() != xhat.size() || x.size() != xhat.size()) {
        throw DimensionError("relation_check: state sizes differ");
    }
    Vector v(2 * x.size());
    v << xhat - xbar, x - xhat;
    return psd_dominates(q, v * v.transpose(), tol);
}

bool relation_check_moment(const Matrix& q, const Matrix& m, double tol) { return psd_dominates(q, m, tol); }

} // namespace certkit
