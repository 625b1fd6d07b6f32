#include "certkit/model.hpp"

namespace certkit {

void StochasticLti::validate() const {
    require_square(A, "A");
    const auto n = A.rows();
    if (B.rows() != n) throw DimensionError("B must have as many rows as A");
    if (C.cols() != n) throw DimensionError("C must have as many columns as A");
    if (H.cols() != n) throw DimensionError("H must have as many columns as A");
    if (F.rows() != n) throw DimensionError("F must have as many rows as A");
    if (E.rows() != C.rows()) throw DimensionError("E must have as many rows as C");
    if (x0.size() != n) throw DimensionError("x0 must have one entry per state");
    require_shape(P0, n, n, "P0");
    for (const Matrix* m : {&A, &B, &C, &H, &F, &E, &P0}) {
        require_finite(*m, "model matrix");
    }
    require_finite(x0, "x0");
    if ((P0 - P0.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
        (n > 0 && min_symmetric_eigenvalue(P0) < -1e-12)) {
        throw ShapeError("P0 must be symmetric positive semidefinite");
    }
}

void DeterministicLti::validate() const {
    require_square(A, "A");
    const auto n = A.rows();
    if (B.rows() != n) throw DimensionError("B must have as many rows as A");
    if (C.cols() != n) throw DimensionError("C must have as many columns as A");
    if (H.cols() != n) throw DimensionError("H must have as many columns as A");
    if (x0.size() != n) throw DimensionError("x0 must have one entry per state");
}

DeterministicLti noiseless(const StochasticLti& m) { return {m.A, m.B, m.C, m.H, m.x0}; }

Vector step(const StochasticLti& m, const Vector& x, const Vector& u, const Vector& w1) {
    if (x.size() != m.states() || u.size() != m.inputs() || w1.size() != m.process_noise()) {
        throw DimensionError("step: state, input or process-noise size mismatch");
    }
    return m.A * x + m.B * u + m.F * w1;
}

Vector step(const DeterministicLti& m, const Vector& x, const Vector& u) {
    if (x.size() != m.states() || u.size() != m.inputs()) {
        throw DimensionError("step: state or input size mismatch");
    }
    return m.A * x + m.B * u;
}

Measurement outputs(const StochasticLti& m, const Vector& x, const Vector& w2) {
    if (x.size() != m.states() || w2.size() != m.sensor_noise()) {
        throw DimensionError("outputs: state or sensor-noise size mismatch");
    }
    return {m.C * x + m.E * w2, m.H * x};
}

StochasticLti case_study_model() {
    StochasticLti m;
    m.A = make_matrix({{0.8725, 0.0625, 0.0375}, {0.0625, 0.8775, 0.0250}, {0.0, 0.0, 0.9900}});
    m.B = make_matrix({{0.0650, 0.0}, {0.0, 0.0600}, {0.0, 0.0}});
    m.C = make_matrix({{1, 0, 0}, {0, 0, 1}});
    m.H = make_matrix({{1, 0, 0}, {0, 1, 0}});
    m.F = make_matrix({{0.05, -0.02, 0.0}, {-0.02, 0.05, 0.0}, {0.0, 0.0, 0.1}});
    m.E = make_matrix({{0.05, 0.0}, {0.0, 0.05}});
    m.x0 = make_vector({16, 14, -5});
    m.P0 = Matrix::Zero(3, 3);
    return m;
}

DeterministicLti planar_submodel(const DeterministicLti& m) {
    m.validate();
    const auto n = m.states();
    if (n < 2) {
        throw StructureError("planar_submodel needs at least two states");
    }
    if (n > 2) {
        const Matrix feed = m.A.bottomLeftCorner(n - 2, 2);
        const Matrix actuated = m.B.bottomRows(n - 2);
        if (!feed.isZero(0.0) || !actuated.isZero(0.0)) {
            throw StructureError(
                "planar_submodel: states beyond the first two must be autonomous "
                "(not driven by the first two states or by the input)");
        }
    }
    DeterministicLti out;
    out.A = m.A.topLeftCorner(2, 2);
    out.B = m.B.topRows(2);
    out.C = m.C.leftCols(2);
    out.H = Matrix::Identity(2, 2);
    out.x0 = m.x0.head(2);
    return out;
}

} // namespace certkit
