#include "certkit/refine.hpp"

#include <string>

namespace certkit {

Matrix InterfaceFn::gain(const StochasticLti& m) const {
    if (kind == InterfaceKind::feedforward) {
        return Matrix::Zero(m.inputs(), m.states());
    }
    require_shape(K, m.inputs(), m.states(), "interface gain K");
    return K;
}

const char* to_string(InterfaceKind kind) {
    return kind == InterfaceKind::sensor_based ? "sensor_based" : "feedforward";
}

Vector observer_step(const Observer& obs, const StochasticLti& m, const Vector& xhat, const Vector& u,
                     const Vector& y) {
    if (xhat.size() != m.states() || u.size() != m.inputs() || y.size() != m.measurements()) {
        throw DimensionError("observer_step: size mismatch");
    }
    require_shape(obs.L, m.states(), m.measurements(), "observer gain L");
    return m.A * xhat + m.B * u + obs.L * (y - m.C * xhat);
}

Vector interface_eval(const InterfaceFn& ifc, const Vector& ubar, const Vector& xbar, const Vector& xhat) {
    if (xbar.size() != xhat.size()) {
        throw DimensionError("interface_eval: x̄ and x̂ differ in size");
    }
    if (ifc.kind == InterfaceKind::feedforward) {
        return ubar;
    }
    if (ifc.K.rows() != ubar.size() || ifc.K.cols() != xbar.size()) {
        throw DimensionError("interface_eval: K does not match ū and x̄");
    }
    return ubar + ifc.K * (xbar - xhat);
}

Vector pad_state(const Vector& xbar, Eigen::Index n) {
    if (xbar.size() > n) {
        throw DimensionError("pad_state: symbolic state larger than the model state");
    }
    Vector out = Vector::Zero(n);
    out.head(xbar.size()) = xbar;
    return out;
}

ReferenceLaw symbolic_law(std::shared_ptr<const SymbolicController> ctrl) {
    return [ctrl = std::move(ctrl)](const Vector& xbar, Mode q) {
        const auto d = static_cast<Eigen::Index>(ctrl->state_grid.dims());
        if (xbar.size() < d) {
            throw DimensionError("symbolic law: state smaller than the controller grid");
        }
        return controller_eval(*ctrl, xbar.head(d), q);
    };
}

ClosedLoopSystem::ClosedLoopSystem(StochasticLti plant, ReferenceLaw law, Observer observer,
                                   InterfaceFn interface, HybridState initial)
    : plant_(std::move(plant)), law_(std::move(law)), observer_(std::move(observer)),
      interface_(std::move(interface)), initial_(std::move(initial)), state_(initial_) {}

void ClosedLoopSystem::reset(const Vector& x0) {
    if (x0.size() != plant_.states()) {
        throw DimensionError("reset: x0 size mismatch");
    }
    state_ = initial_;
    state_.x = x0;
}

StepRecord ClosedLoopSystem::step(const Vector& w1, const Vector& w2) {
    StepRecord rec;
    rec.xbar = state_.xbar;
    rec.q = state_.q;
    rec.xhat = state_.xhat;
    rec.x = state_.x;

    const ControlAction action = law_(state_.xbar, state_.q);
    rec.ubar = action.ubar;
    rec.u = interface_eval(interface_, rec.ubar, state_.xbar, state_.xhat);
    const Measurement meas = outputs(plant_, state_.x, w2);
    rec.y = meas.y;
    rec.z = meas.z;
    rec.zbar = plant_.H * state_.xbar;
    rec.dev = (rec.z - rec.zbar).norm();

    state_.xbar = plant_.A * state_.xbar + plant_.B * rec.ubar;
    state_.x = certkit::step(plant_, state_.x, rec.u, w1);
    state_.xhat = observer_step(observer_, plant_, rec.xhat, rec.u, rec.y);
    state_.q = action.next;
    return rec;
}

ClosedLoopSystem compose_closed_loop(const StochasticLti& m, ReferenceLaw law, const Observer& obs,
                                     const InterfaceFn& ifc, const Vector& xbar0, Mode q0) {
    m.validate();
    const auto n = m.states();
    require_shape(obs.L, n, m.measurements(), "observer gain L");
    if (obs.xhat0.size() != n || xbar0.size() != n) {
        throw DimensionError("compose_closed_loop: x̂0 and x̄0 must be model-sized");
    }
    const double rho_obs = spectral_radius(m.A - obs.L * m.C);
    if (rho_obs >= 1.0) {
        throw InstabilityError("A-LC is not stable, spectral radius " + std::to_string(rho_obs), rho_obs);
    }
    if (ifc.kind == InterfaceKind::sensor_based) {
        const double rho_ctl = spectral_radius(m.A - m.B * ifc.gain(m));
        if (rho_ctl >= 1.0) {
            throw InstabilityError("A-BK is not stable, spectral radius " + std::to_string(rho_ctl),
                                   rho_ctl);
        }
    }
    (void)law(xbar0, q0); // throws if x̄0 is outside the controller's domain
    HybridState init{xbar0, q0, obs.xhat0, m.x0};
    return ClosedLoopSystem(m, std::move(law), obs, ifc, std::move(init));
}

ErrorSystem error_dynamics(const StochasticLti& m, const Matrix& k, const Matrix& l) {
    const auto n = m.states();
    require_shape(k, m.inputs(), n, "K");
    require_shape(l, n, m.measurements(), "L");
    const auto d1 = m.process_noise();
    const auto d2 = m.sensor_noise();

    ErrorSystem es;
    es.A_cl = Matrix::Zero(2 * n, 2 * n);
    es.A_cl.topLeftCorner(n, n) = m.A - m.B * k;
    es.A_cl.topRightCorner(n, n) = l * m.C;
    es.A_cl.bottomRightCorner(n, n) = m.A - l * m.C;

    const Matrix le = l * m.E;
    es.G = Matrix::Zero(2 * n, d1 + d2);
    es.G.topRightCorner(n, d2) = le;
    es.G.bottomLeftCorner(n, d1) = m.F;
    es.G.bottomRightCorner(n, d2) = -le;

    es.H_tilde = Matrix(m.outputs(), 2 * n);
    es.H_tilde << m.H, m.H;
    return es;
}

} // namespace certkit
