#include "certkit/symbolic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace certkit {

Grid::Grid(std::vector<double> lower, std::vector<double> upper, std::vector<double> eta)
    : lower_(std::move(lower)), upper_(std::move(upper)), eta_(std::move(eta)) {
    if (lower_.empty() || lower_.size() != upper_.size() || lower_.size() != eta_.size()) {
        throw GridError("grid bounds and quantization must have the same nonzero length");
    }
    size_ = 1;
    for (std::size_t d = 0; d < lower_.size(); ++d) {
        if (!std::isfinite(lower_[d]) || !std::isfinite(upper_[d]) || !(upper_[d] > lower_[d]) ||
            !(eta_[d] > 0.0)) {
            throw GridError("grid dimension " + std::to_string(d) +
                            " needs finite bounds with upper > lower and eta > 0");
        }
        const double cells = (upper_[d] - lower_[d]) / eta_[d];
        const double rounded = std::round(cells);
        if (std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells) || rounded < 1.0) {
            throw GridError("grid dimension " + std::to_string(d) +
                            ": range is not a whole number of cells");
        }
        if (rounded > static_cast<double>(std::numeric_limits<std::int32_t>::max())) {
            throw GridError("grid dimension " + std::to_string(d) + " has too many cells");
        }
        counts_.push_back(static_cast<std::int32_t>(rounded));
        size_ *= static_cast<std::size_t>(rounded);
    }
}

std::int64_t Grid::axis_index(std::size_t d, double x) const {
    auto k = static_cast<std::int64_t>(std::floor((x - lower_[d]) / eta_[d]));
    if (x == upper_[d]) {
        k = counts_[d] - 1; // last cell is closed
    }
    return k;
}

std::optional<std::size_t> Grid::cell_of(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != dims()) {
        throw DimensionError("cell_of: point has wrong dimension");
    }
    std::vector<std::int32_t> idx(dims());
    for (std::size_t d = 0; d < dims(); ++d) {
        const double v = x(static_cast<Eigen::Index>(d));
        if (!(v >= lower_[d] && v <= upper_[d])) {
            return std::nullopt;
        }
        const auto k = std::clamp<std::int64_t>(axis_index(d, v), 0, counts_[d] - 1);
        idx[d] = static_cast<std::int32_t>(k);
    }
    return flat(idx);
}

std::size_t Grid::flat(const std::vector<std::int32_t>& idx) const {
    std::size_t out = 0;
    for (std::size_t d = 0; d < dims(); ++d) {
        out = out * static_cast<std::size_t>(counts_[d]) + static_cast<std::size_t>(idx[d]);
    }
    return out;
}

std::vector<std::int32_t> Grid::unflat(std::size_t cell) const {
    std::vector<std::int32_t> idx(dims());
    for (std::size_t d = dims(); d-- > 0;) {
        const auto c = static_cast<std::size_t>(counts_[d]);
        idx[d] = static_cast<std::int32_t>(cell % c);
        cell /= c;
    }
    return idx;
}

Vector Grid::cell_lower(std::size_t cell) const {
    const auto idx = unflat(cell);
    Vector v(static_cast<Eigen::Index>(dims()));
    for (std::size_t d = 0; d < dims(); ++d) {
        v(static_cast<Eigen::Index>(d)) = lower_[d] + idx[d] * eta_[d];
    }
    return v;
}

Vector Grid::cell_center(std::size_t cell) const {
    Vector v = cell_lower(cell);
    for (std::size_t d = 0; d < dims(); ++d) {
        v(static_cast<Eigen::Index>(d)) += 0.5 * eta_[d];
    }
    return v;
}

std::vector<std::size_t> SymbolicAbstraction::successors(std::size_t cell, std::size_t input) const {
    const CellRect& r = rect(cell, input);
    std::vector<std::size_t> out;
    if (!r.in_domain()) {
        return out;
    }
    const auto cols = static_cast<std::size_t>(state_grid_.counts()[1]);
    for (auto i = r.lo0; i <= r.hi0; ++i) {
        for (auto j = r.lo1; j <= r.hi1; ++j) {
            out.push_back(static_cast<std::size_t>(i) * cols + static_cast<std::size_t>(j));
        }
    }
    return out;
}

namespace {

constexpr std::size_t kMaxPairs = std::size_t{1} << 31;

struct PlanarMap {
    double a00, a01, a10, a11;
    std::vector<std::array<double, 2>> offsets; // B₂ ū per input cell
};

PlanarMap prepare(const DeterministicLti& planar, const Grid& state_grid, const Grid& input_grid) {
    planar.validate();
    if (planar.states() != 2) {
        throw DimensionError("abstraction needs a 2-state model");
    }
    if (state_grid.dims() != 2) {
        throw GridError("state grid must be two-dimensional");
    }
    if (input_grid.dims() != static_cast<std::size_t>(planar.inputs())) {
        throw GridError("input grid dimension must equal the number of inputs");
    }
    if (state_grid.size() > kMaxPairs / input_grid.size()) {
        throw GridError("abstraction too large: " + std::to_string(state_grid.size()) +
                        " state cells x " + std::to_string(input_grid.size()) +
                        " input cells exceeds 2^31 transitions");
    }
    PlanarMap map{planar.A(0, 0), planar.A(0, 1), planar.A(1, 0), planar.A(1, 1), {}};
    map.offsets.resize(input_grid.size());
    for (std::size_t u = 0; u < input_grid.size(); ++u) {
        const Vector off = planar.B * input_grid.cell_center(u);
        map.offsets[u] = {off(0), off(1)};
    }
    return map;
}

// Successor rectangle of one (cell, input) pair: bounding box of the affine image of the
// cell, padded outward by a few ulps so rounding in concrete evaluation stays inside.
CellRect image_rect(const PlanarMap& map, const Grid& grid, double lo0, double lo1,
                    const std::array<double, 2>& off) {
    const double h0 = 0.5 * grid.eta()[0];
    const double h1 = 0.5 * grid.eta()[1];
    const double c0 = lo0 + h0;
    const double c1 = lo1 + h1;
    const double m0 = map.a00 * c0 + map.a01 * c1 + off[0];
    const double m1 = map.a10 * c0 + map.a11 * c1 + off[1];
    const double r0 = std::abs(map.a00) * h0 + std::abs(map.a01) * h1;
    const double r1 = std::abs(map.a10) * h0 + std::abs(map.a11) * h1;
    const double pad0 = 1e-12 * (1.0 + std::abs(m0) + r0);
    const double pad1 = 1e-12 * (1.0 + std::abs(m1) + r1);
    const double bl0 = m0 - r0 - pad0, bh0 = m0 + r0 + pad0;
    const double bl1 = m1 - r1 - pad1, bh1 = m1 + r1 + pad1;

    // the domain test uses the exact box; padding only widens the index range
    if (m0 - r0 < grid.lower()[0] || m0 + r0 > grid.upper()[0] || m1 - r1 < grid.lower()[1] ||
        m1 + r1 > grid.upper()[1]) {
        return {};
    }
    const auto clamp0 = [&](std::int64_t k) {
        return static_cast<std::int32_t>(std::clamp<std::int64_t>(k, 0, grid.counts()[0] - 1));
    };
    const auto clamp1 = [&](std::int64_t k) {
        return static_cast<std::int32_t>(std::clamp<std::int64_t>(k, 0, grid.counts()[1] - 1));
    };
    return {clamp0(grid.axis_index(0, bl0)), clamp0(grid.axis_index(0, bh0)),
            clamp1(grid.axis_index(1, bl1)), clamp1(grid.axis_index(1, bh1))};
}

void fill_cell(const PlanarMap& map, const Grid& grid, std::size_t cell, std::size_t n_inputs,
               std::vector<CellRect>& table) {
    const Vector lo = grid.cell_lower(cell);
    for (std::size_t u = 0; u < n_inputs; ++u) {
        table[cell * n_inputs + u] = image_rect(map, grid, lo(0), lo(1), map.offsets[u]);
    }
}

} // namespace

SymbolicAbstraction abstract(const DeterministicLti& planar, const Grid& state_grid,
                             const Grid& input_grid) {
    const PlanarMap map = prepare(planar, state_grid, input_grid);
    const std::size_t n_inputs = input_grid.size();
    std::vector<CellRect> table(state_grid.size() * n_inputs);
    const auto n_cells = static_cast<std::int64_t>(state_grid.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t cell = 0; cell < n_cells; ++cell) {
        fill_cell(map, state_grid, static_cast<std::size_t>(cell), n_inputs, table);
    }
    return {state_grid, input_grid, std::move(table)};
}

SymbolicAbstraction abstract_serial(const DeterministicLti& planar, const Grid& state_grid,
                                    const Grid& input_grid) {
    const PlanarMap map = prepare(planar, state_grid, input_grid);
    const std::size_t n_inputs = input_grid.size();
    std::vector<CellRect> table(state_grid.size() * n_inputs);
    for (std::size_t cell = 0; cell < state_grid.size(); ++cell) {
        fill_cell(map, state_grid, cell, n_inputs, table);
    }
    return {state_grid, input_grid, std::move(table)};
}

std::size_t SymbolicController::winning_count() const {
    return static_cast<std::size_t>(std::count(winning.begin(), winning.end(), 1));
}

std::size_t SymbolicController::invariant_count() const {
    return static_cast<std::size_t>(std::count(invariant.begin(), invariant.end(), 1));
}

std::vector<std::uint8_t> snap_target(const Grid& grid, const ReachStaySpec& spec) {
    if (spec.lower.size() != grid.dims() || spec.upper.size() != grid.dims()) {
        throw DimensionError("target box dimension must match the state grid");
    }
    std::vector<std::int64_t> first(grid.dims()), last(grid.dims());
    for (std::size_t d = 0; d < grid.dims(); ++d) {
        if (!(spec.upper[d] >= spec.lower[d])) {
            throw InfeasibleError("target box is empty in dimension " + std::to_string(d));
        }
        const double eta = grid.eta()[d];
        // Cells [lo + kη, lo + (k+1)η] fully inside [a, b], with a 1e-9 cell slack.
        first[d] = static_cast<std::int64_t>(std::ceil((spec.lower[d] - grid.lower()[d]) / eta - 1e-9));
        last[d] = static_cast<std::int64_t>(std::floor((spec.upper[d] - grid.lower()[d]) / eta + 1e-9)) - 1;
        first[d] = std::max<std::int64_t>(first[d], 0);
        last[d] = std::min<std::int64_t>(last[d], grid.counts()[d] - 1);
        if (first[d] > last[d]) {
            throw InfeasibleError("target box contains no whole grid cell in dimension " +
                                  std::to_string(d));
        }
    }
    std::vector<std::uint8_t> target(grid.size(), 0);
    for (std::size_t cell = 0; cell < grid.size(); ++cell) {
        const auto idx = grid.unflat(cell);
        bool inside = true;
        for (std::size_t d = 0; d < grid.dims(); ++d) {
            inside = inside && idx[d] >= first[d] && idx[d] <= last[d];
        }
        target[cell] = inside ? 1 : 0;
    }
    return target;
}

namespace {

bool rect_inside(const CellRect& r, const std::vector<std::uint8_t>& set, std::size_t cols) {
    if (!r.in_domain()) {
        return false;
    }
    for (auto i = r.lo0; i <= r.hi0; ++i) {
        const std::size_t row = static_cast<std::size_t>(i) * cols;
        for (auto j = r.lo1; j <= r.hi1; ++j) {
            if (set[row + static_cast<std::size_t>(j)] == 0) {
                return false;
            }
        }
    }
    return true;
}

// Smallest input whose successors all lie in `set`, or -1.
std::int32_t first_safe_input(const SymbolicAbstraction& abs, std::size_t cell,
                              const std::vector<std::uint8_t>& set) {
    const auto cols = static_cast<std::size_t>(abs.state_grid().counts()[1]);
    for (std::size_t u = 0; u < abs.num_inputs(); ++u) {
        if (rect_inside(abs.rect(cell, u), set, cols)) {
            return static_cast<std::int32_t>(u);
        }
    }
    return -1;
}

// One Jacobi-style sweep: every cell reads the previous set, writes only its own entry.
template <bool Parallel>
std::vector<std::int32_t> sweep(const SymbolicAbstraction& abs, const std::vector<std::uint8_t>& set,
                                const std::vector<std::uint8_t>& candidates) {
    const auto n = static_cast<std::int64_t>(abs.num_states());
    std::vector<std::int32_t> witness(abs.num_states(), -1);
    if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic, 64)
        for (std::int64_t c = 0; c < n; ++c) {
            const auto cell = static_cast<std::size_t>(c);
            if (candidates[cell] != 0) {
                witness[cell] = first_safe_input(abs, cell, set);
            }
        }
    } else {
        for (std::int64_t c = 0; c < n; ++c) {
            const auto cell = static_cast<std::size_t>(c);
            if (candidates[cell] != 0) {
                witness[cell] = first_safe_input(abs, cell, set);
            }
        }
    }
    return witness;
}

template <bool Parallel>
SymbolicController synthesize(const SymbolicAbstraction& abs, const ReachStaySpec& spec) {
    const Grid& grid = abs.state_grid();
    if (grid.dims() != 2) {
        throw GridError("reach-stay synthesis needs a planar abstraction");
    }
    const std::size_t n = grid.size();
    SymbolicController ctrl;
    ctrl.state_grid = grid;
    ctrl.input_grid = abs.input_grid();

    // Greatest fixed point: drop target cells with no input keeping every successor inside.
    std::vector<std::uint8_t> inv = snap_target(grid, spec);
    std::vector<std::int32_t> witness;
    for (;;) {
        witness = sweep<Parallel>(abs, inv, inv);
        std::size_t removed = 0;
        for (std::size_t c = 0; c < n; ++c) {
            if (inv[c] != 0 && witness[c] < 0) {
                inv[c] = 0;
                ++removed;
            }
        }
        ctrl.trace.invariant_sizes.push_back(
            static_cast<std::size_t>(std::count(inv.begin(), inv.end(), 1)));
        if (removed == 0) {
            break;
        }
    }
    if (ctrl.trace.invariant_sizes.back() == 0) {
        throw InfeasibleError("no controlled-invariant cells inside the target box on this grid");
    }

    ctrl.invariant = inv;
    ctrl.stay_policy.assign(n, -1);
    for (std::size_t c = 0; c < n; ++c) {
        if (inv[c] != 0) {
            ctrl.stay_policy[c] = witness[c];
        }
    }

    // Least fixed point: add cells with an input whose successors all lie in the current set.
    std::vector<std::uint8_t> win = inv;
    ctrl.reach_policy = ctrl.stay_policy;
    ctrl.trace.winning_sizes.push_back(static_cast<std::size_t>(std::count(win.begin(), win.end(), 1)));
    for (;;) {
        std::vector<std::uint8_t> candidates(n);
        for (std::size_t c = 0; c < n; ++c) {
            candidates[c] = win[c] == 0 ? 1 : 0;
        }
        witness = sweep<Parallel>(abs, win, candidates);
        std::size_t added = 0;
        for (std::size_t c = 0; c < n; ++c) {
            if (candidates[c] != 0 && witness[c] >= 0) {
                win[c] = 1;
                ctrl.reach_policy[c] = witness[c];
                ++added;
            }
        }
        if (added == 0) {
            break;
        }
        ctrl.trace.winning_sizes.push_back(ctrl.trace.winning_sizes.back() + added);
    }
    ctrl.winning = std::move(win);
    return ctrl;
}

} // namespace

SymbolicController synthesize_reach_stay(const SymbolicAbstraction& abs, const ReachStaySpec& spec) {
    return synthesize<true>(abs, spec);
}

SymbolicController synthesize_reach_stay_serial(const SymbolicAbstraction& abs,
                                                const ReachStaySpec& spec) {
    return synthesize<false>(abs, spec);
}

ControlAction controller_eval(const SymbolicController& ctrl, const Vector& xbar, Mode q) {
    const auto cell = ctrl.state_grid.cell_of(xbar);
    if (!cell || !ctrl.is_winning(*cell)) {
        throw OutOfWinningSetError("symbolic state outside the winning set; controller undefined");
    }
    if (ctrl.is_invariant(*cell)) {
        return {ctrl.input_grid.cell_center(static_cast<std::size_t>(ctrl.stay_policy[*cell])),
                Mode::stay};
    }
    if (q == Mode::stay) {
        throw OutOfWinningSetError("stay mode left the controlled-invariant set");
    }
    return {ctrl.input_grid.cell_center(static_cast<std::size_t>(ctrl.reach_policy[*cell])),
            Mode::reach};
}

} // namespace certkit
