#include "certkit/matops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace certkit {

namespace {

std::string shape_of(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

// Solves X·M = R for symmetric positive definite M (small, dense).
Matrix solve_right_spd(const Matrix& m, const Matrix& rhs, std::string_view what) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) {
        throw SingularityError(std::string(what) + " is singular or indefinite");
    }
    const Vector diag = Matrix(llt.matrixL()).diagonal();
    const double min_pivot = diag.cwiseAbs().minCoeff();
    if (min_pivot * min_pivot < 1e-14 * scale) {
        throw SingularityError(std::string(what) + " is numerically singular");
    }
    return llt.solve(rhs.transpose()).transpose();
}

} // namespace

Matrix make_matrix(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) {
        return Matrix(0, 0);
    }
    const auto cols = rows.front().size();
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) {
            throw DimensionError("ragged matrix: row " + std::to_string(i) + " has " +
                                 std::to_string(rows[i].size()) + " entries, expected " +
                                 std::to_string(cols));
        }
        for (std::size_t j = 0; j < cols; ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    require_finite(m, "matrix");
    return m;
}

Vector make_vector(const std::vector<double>& values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = values[i];
    }
    require_finite(v, "vector");
    return v;
}

void require_finite(const Matrix& m, std::string_view what) {
    if (!m.allFinite()) {
        throw DimensionError(std::string(what) + " has non-finite entries");
    }
}

void require_square(const Matrix& m, std::string_view what) {
    if (m.rows() != m.cols()) {
        throw DimensionError(std::string(what) + " must be square, got " + shape_of(m));
    }
}

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, std::string_view what) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << what << " must be " << rows << "x" << cols << ", got " << shape_of(m);
        throw DimensionError(os.str());
    }
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double spectral_radius(const Matrix& a) {
    require_square(a, "spectral_radius input");
    if (a.size() == 0) {
        return 0.0;
    }
    // A^(2^k) = exp(log_scale) * m with ‖m‖_F = 1 after normalization.
    Matrix m = a;
    double log_scale = 0.0;
    double prev = -1.0;
    for (int k = 0; k < 64; ++k) {
        const double nrm = m.norm();
        if (nrm == 0.0 || !std::isfinite(nrm)) {
            return nrm == 0.0 ? 0.0 : prev;
        }
        log_scale += std::log(nrm);
        m /= nrm;
        const double est = std::exp(std::ldexp(log_scale, -k));
        if (k >= 8 && std::abs(est - prev) <= 1e-13 * est) {
            return est;
        }
        prev = est;
        m = (m * m).eval();
        log_scale *= 2.0;
    }
    return prev;
}

SymmetricEigen symmetric_eigen(const Matrix& s) {
    require_square(s, "symmetric_eigen input");
    const Eigen::Index n = s.rows();
    Matrix a = s.triangularView<Eigen::Upper>();
    a = Matrix(a.selfadjointView<Eigen::Upper>());
    Matrix v = Matrix::Identity(n, n);

    const double scale = std::max(a.norm(), std::numeric_limits<double>::min());
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                off += a(i, j) * a(i, j);
            }
        }
        if (std::sqrt(off) <= 1e-15 * scale) {
            break;
        }
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) {
                    continue;
                }
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        order[static_cast<std::size_t>(i)] = i;
    }
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });
    SymmetricEigen out{Vector(n), Matrix(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto src = order[static_cast<std::size_t>(i)];
        out.values(i) = a(src, src);
        out.vectors.col(i) = v.col(src);
    }
    return out;
}

double min_symmetric_eigenvalue(const Matrix& s) {
    if (s.size() == 0) {
        return 0.0;
    }
    return symmetric_eigen(s).values(0);
}

LyapunovSolution solve_discrete_lyapunov(const Matrix& a, const Matrix& w, SolverOptions opts) {
    require_square(a, "Lyapunov A");
    require_shape(w, a.rows(), a.cols(), "Lyapunov W");
    const double rho = spectral_radius(a);
    if (rho >= 1.0) {
        throw InstabilityError("Lyapunov equation needs a Schur-stable A, spectral radius " +
                                   std::to_string(rho),
                               rho);
    }

    Matrix ak = a;
    Matrix q = symmetrize(w);
    SolverReport report;
    for (report.iterations = 1; report.iterations <= opts.max_iter; ++report.iterations) {
        const Matrix inc = ak * q * ak.transpose();
        q += inc;
        q = symmetrize(q);
        ak = (ak * ak).eval();
        if (inc.norm() <= opts.tol) {
            break;
        }
    }
    report.iterations = std::min(report.iterations, opts.max_iter);
    report.residual_norm = (q - a * q * a.transpose() - w).norm();
    report.converged = report.residual_norm <= opts.tol;
    if (!report.converged) {
        throw ConvergenceError("Lyapunov doubling did not reach tolerance, residual " +
                                   std::to_string(report.residual_norm),
                               report);
    }
    return {q, report};
}

KalmanSolution solve_dare_kalman(const Matrix& a, const Matrix& c, const Matrix& f, const Matrix& e,
                                 SolverOptions opts) {
    require_square(a, "A");
    const auto n = a.rows();
    if (c.cols() != n || f.rows() != n || e.rows() != c.rows()) {
        throw DimensionError("Kalman DARE: inconsistent dimensions of A, C, F, E");
    }
    const Matrix ff = f * f.transpose();
    const Matrix ee = e * e.transpose();

    auto riccati = [&](const Matrix& p, Matrix* gain) {
        const Matrix apc = a * p * c.transpose();
        const Matrix gain_l = solve_right_spd(c * p * c.transpose() + ee, apc,
                                              "innovation covariance CPCᵀ+EEᵀ");
        if (gain != nullptr) {
            *gain = gain_l;
        }
        return symmetrize(a * p * a.transpose() - gain_l * apc.transpose() + ff);
    };

    Matrix p = Matrix::Zero(n, n);
    SolverReport report;
    for (report.iterations = 1; report.iterations <= opts.max_iter; ++report.iterations) {
        const Matrix next = riccati(p, nullptr);
        report.residual_norm = (next - p).norm();
        p = next;
        if (!p.allFinite()) {
            throw ConvergenceError("Kalman DARE diverged", report);
        }
        if (report.residual_norm <= opts.tol) {
            report.converged = true;
            break;
        }
    }
    if (!report.converged) {
        report.iterations = opts.max_iter;
        throw ConvergenceError("Kalman DARE did not converge, last residual " +
                                   std::to_string(report.residual_norm),
                               report);
    }
    Matrix gain;
    report.residual_norm = (riccati(p, &gain) - p).norm();
    report.converged = report.residual_norm <= opts.tol;
    const double rho = spectral_radius(a - gain * c);
    if (rho >= 1.0) {
        throw InstabilityError("Kalman gain does not stabilize A-LC, spectral radius " +
                                   std::to_string(rho),
                               rho);
    }
    return {p, gain, report};
}

LqSolution solve_dare_lq(const Matrix& a, const Matrix& b, const Matrix& h, const Matrix& d_h,
                         SolverOptions opts) {
    require_square(a, "A");
    const auto n = a.rows();
    const auto m = b.cols();
    if (b.rows() != n || h.cols() != n) {
        throw DimensionError("LQ DARE: inconsistent dimensions of A, B, H");
    }
    Matrix r = Matrix::Zero(m, m);
    if (d_h.size() != 0) {
        if (d_h.cols() != m) {
            throw DimensionError("LQ DARE: D_H must have one column per input");
        }
        r = d_h.transpose() * d_h;
    }
    const Matrix hh = h.transpose() * h;

    auto riccati = [&](const Matrix& s, Matrix* gain) {
        const Matrix bsa = b.transpose() * s * a;
        const Matrix k = solve_right_spd(b.transpose() * s * b + r, bsa.transpose(),
                                         "control Hessian BᵀSB+D_HᵀD_H")
                             .transpose();
        if (gain != nullptr) {
            *gain = k;
        }
        return symmetrize(a.transpose() * s * a - bsa.transpose() * k + hh);
    };

    // The map at S = 0 evaluates to HᵀH whenever it is defined; starting there avoids
    // inverting a zero Hessian when D_H = 0.
    Matrix s = hh;
    SolverReport report;
    if (s.isZero(0.0) && r.isZero(0.0)) {
        throw SingularityError("control Hessian BᵀSB+D_HᵀD_H is zero (no state cost, no D_H)");
    }
    if (s.isZero(0.0)) {
        // S = 0 is a fixed point; with an invertible input weight the gain is zero.
        report.iterations = 1;
        report.converged = true;
        return {s, Matrix::Zero(m, n), report};
    }
    for (report.iterations = 1; report.iterations <= opts.max_iter; ++report.iterations) {
        const Matrix next = riccati(s, nullptr);
        report.residual_norm = (next - s).norm();
        s = next;
        if (!s.allFinite()) {
            throw ConvergenceError("LQ DARE diverged", report);
        }
        if (report.residual_norm <= opts.tol) {
            report.converged = true;
            break;
        }
    }
    if (!report.converged) {
        report.iterations = opts.max_iter;
        throw ConvergenceError("LQ DARE did not converge, last residual " +
                                   std::to_string(report.residual_norm),
                               report);
    }
    Matrix gain;
    report.residual_norm = (riccati(s, &gain) - s).norm();
    report.converged = report.residual_norm <= opts.tol;
    const double rho = spectral_radius(a - b * gain);
    if (rho >= 1.0) {
        throw InstabilityError("LQ gain does not stabilize A-BK, spectral radius " +
                                   std::to_string(rho),
                               rho);
    }
    return {s, gain, report};
}

bool psd_dominates(const Matrix& q, const Matrix& m, double tol) {
    require_square(q, "Q");
    require_shape(m, q.rows(), q.cols(), "M");
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > tol ||
        (m - m.transpose()).cwiseAbs().maxCoeff() > tol) {
        throw ShapeError("psd_dominates needs symmetric arguments");
    }
    if (q.size() == 0) {
        return true;
    }
    return min_symmetric_eigenvalue(symmetrize(q - m)) >= -tol;
}

double min_dominating_scale(const Matrix& q, const Matrix& m) {
    require_square(q, "Q");
    require_shape(m, q.rows(), q.cols(), "M");
    if (q.size() == 0) {
        return 0.0;
    }
    Eigen::LLT<Matrix> llt(symmetrize(q));
    if (llt.info() != Eigen::Success || min_symmetric_eigenvalue(q) <= 0.0) {
        throw SingularityError("min_dominating_scale needs a positive definite Q");
    }
    const Matrix lower = llt.matrixL();
    // λ_max of L⁻¹ M L⁻ᵀ
    const Matrix x = lower.triangularView<Eigen::Lower>().solve(symmetrize(m));
    const Matrix y = lower.triangularView<Eigen::Lower>().solve(x.transpose());
    const double lambda = symmetric_eigen(symmetrize(y)).values.maxCoeff();
    return std::max(0.0, lambda);
}

} // namespace certkit
