#pragma once

#include <functional>
#include <memory>

#include "certkit/matops.hpp"
#include "certkit/model.hpp"
#include "certkit/symbolic.hpp"

namespace certkit {

/// Luenberger observer x̂' = A x̂ + B u + L (y − C x̂).
struct Observer {
    Matrix L;
    Vector xhat0;
};

enum class InterfaceKind : std::uint8_t { sensor_based, feedforward };

/// u = ū + K (x̄ − x̂) for the sensor-based variant, u = ū for feedforward.
struct InterfaceFn {
    InterfaceKind kind = InterfaceKind::feedforward;
    Matrix K; // empty for feedforward

    static InterfaceFn sensor_based(Matrix k) { return {InterfaceKind::sensor_based, std::move(k)}; }
    static InterfaceFn feedforward() { return {InterfaceKind::feedforward, Matrix()}; }

    /// K, or the m×n zero matrix for feedforward.
    Matrix gain(const StochasticLti& m) const;
};

const char* to_string(InterfaceKind kind);

Vector observer_step(const Observer& obs, const StochasticLti& m, const Vector& xhat, const Vector& u,
                     const Vector& y);
Vector interface_eval(const InterfaceFn& ifc, const Vector& ubar, const Vector& xbar, const Vector& xhat);

/// Embeds a low-dimensional symbolic state into R^n with trailing zeros.
Vector pad_state(const Vector& xbar, Eigen::Index n);

/// The ideal state-feedback law ū_q(x̄) together with the mode update δ, evaluated on the
/// n-dimensional (padded) symbolic state.
using ReferenceLaw = std::function<ControlAction(const Vector& xbar, Mode q)>;

/// Wraps a planar symbolic controller: only the first grid-dims components of x̄ are read.
ReferenceLaw symbolic_law(std::shared_ptr<const SymbolicController> ctrl);

struct HybridState {
    Vector xbar;
    Mode q = Mode::reach;
    Vector xhat;
    Vector x;
};

/// Everything observed at time t before the update to t+1.
struct StepRecord {
    Vector xbar;
    Mode q = Mode::reach;
    Vector xhat, x, ubar, u, y, z, zbar;
    double dev = 0.0; // ‖z − z̄‖₂
};

/// Output-feedback closed loop: ideal model, plant, observer and interface advanced in a
/// fixed order each step.
class ClosedLoopSystem {
public:
    ClosedLoopSystem(StochasticLti plant, ReferenceLaw law, Observer observer, InterfaceFn interface,
                     HybridState initial);

    /// Records the current time instant, then advances using the given noise samples.
    StepRecord step(const Vector& w1, const Vector& w2);

    const HybridState& state() const { return state_; }
    const StochasticLti& plant() const { return plant_; }
    const Observer& observer() const { return observer_; }
    const InterfaceFn& interface() const { return interface_; }
    const HybridState& initial() const { return initial_; }
    void reset(const Vector& x0);

private:
    StochasticLti plant_;
    ReferenceLaw law_;
    Observer observer_;
    InterfaceFn interface_;
    HybridState initial_;
    HybridState state_;
};

/// Validates dimensions and stability of both gains and that x̄0 lies in the law's domain.
/// x̂(0) is taken from the observer; x(0) defaults to the model's x0.
ClosedLoopSystem compose_closed_loop(const StochasticLti& m, ReferenceLaw law, const Observer& obs,
                                     const InterfaceFn& ifc, const Vector& xbar0, Mode q0);

/// Congruence-transformed error dynamics of (Δ, e) = (x̂ − x̄, x − x̂):
/// [Δ; e]' = A_cl [Δ; e] + G [w1; w2],  z − z̄ = H̃ [Δ; e].
struct ErrorSystem {
    Matrix A_cl; // [[A−BK, LC], [0, A−LC]]
    Matrix G;    // [[0, LE], [F, −LE]]
    Matrix H_tilde; // [H, H]
};

ErrorSystem error_dynamics(const StochasticLti& m, const Matrix& k, const Matrix& l);

} // namespace certkit
