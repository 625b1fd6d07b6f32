#pragma once

#include "certkit/matops.hpp"

namespace certkit {

/// x(t+1) = A x + B u + F w1,  y = C x + E w2,  z = H x,  x(0) ~ N(x0, P0).
/// Temperatures in the building preset are in °C.
struct StochasticLti {
    Matrix A, B, C, H, F, E;
    Vector x0;
    Matrix P0;

    Eigen::Index states() const { return A.rows(); }
    Eigen::Index inputs() const { return B.cols(); }
    Eigen::Index measurements() const { return C.rows(); }
    Eigen::Index outputs() const { return H.rows(); }
    Eigen::Index process_noise() const { return F.cols(); }
    Eigen::Index sensor_noise() const { return E.cols(); }

    /// Throws DimensionError on inconsistent shapes, ShapeError if P0 is not symmetric PSD.
    void validate() const;
};

/// Noiseless counterpart used for synthesis.
struct DeterministicLti {
    Matrix A, B, C, H;
    Vector x0;

    Eigen::Index states() const { return A.rows(); }
    Eigen::Index inputs() const { return B.cols(); }
    void validate() const;
};

DeterministicLti noiseless(const StochasticLti& m);

/// x' = A x + B u + F w1
Vector step(const StochasticLti& m, const Vector& x, const Vector& u, const Vector& w1);
Vector step(const DeterministicLti& m, const Vector& x, const Vector& u);

struct Measurement {
    Vector y; // C x + E w2
    Vector z; // H x, never noisy
};

Measurement outputs(const StochasticLti& m, const Vector& x, const Vector& w2);

/// The two-zone building with ambient temperature deviation as third state.
StochasticLti case_study_model();

/// Restricts a model to its first two states. States from index 2 on must not be driven by
/// the first two or by the input; their influence on the first two is treated as a
/// zero-mean deviation and dropped. The returned H is the 2×2 identity.
DeterministicLti planar_submodel(const DeterministicLti& m);

} // namespace certkit
