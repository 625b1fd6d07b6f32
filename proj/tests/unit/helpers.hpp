#pragma once

#include <random>

#include "certkit/matops.hpp"

namespace testutil {

using certkit::Matrix;
using certkit::Vector;

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = nd(rng);
    return m;
}

// Random matrix rescaled to spectral radius `rho` (via the eigenvalues, not our own routine).
inline Matrix random_stable(std::mt19937_64& rng, Eigen::Index n, double rho) {
    Matrix a = random_matrix(rng, n, n);
    const double r = Eigen::EigenSolver<Matrix>(a).eigenvalues().cwiseAbs().maxCoeff();
    return a * (rho / r);
}

inline double eig_radius(const Matrix& a) { return Eigen::EigenSolver<Matrix>(a).eigenvalues().cwiseAbs().maxCoeff(); }

inline double min_eig(const Matrix& s) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (s + s.transpose())).eigenvalues().minCoeff();
}

} // namespace testutil
