#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "certkit/matops.hpp"
#include "certkit/model.hpp"

namespace certkit {

/// Uniform box grid. Cells are half-open [lo + kη, lo + (k+1)η) except the last cell
/// per dimension, which is closed. Flat indices are row-major (dimension 0 outermost).
class Grid {
public:
    Grid() = default;
    Grid(std::vector<double> lower, std::vector<double> upper, std::vector<double> eta);

    std::size_t dims() const { return lower_.size(); }
    std::size_t size() const { return size_; }
    const std::vector<double>& lower() const { return lower_; }
    const std::vector<double>& upper() const { return upper_; }
    const std::vector<double>& eta() const { return eta_; }
    const std::vector<std::int32_t>& counts() const { return counts_; }

    /// Per-dimension cell index of coordinate x (no range check; may be out of [0, count)).
    std::int64_t axis_index(std::size_t d, double x) const;
    std::optional<std::size_t> cell_of(const Vector& x) const;
    std::size_t flat(const std::vector<std::int32_t>& idx) const;
    std::vector<std::int32_t> unflat(std::size_t cell) const;
    Vector cell_lower(std::size_t cell) const;
    Vector cell_center(std::size_t cell) const;

    bool operator==(const Grid&) const = default;

private:
    std::vector<double> lower_, upper_, eta_;
    std::vector<std::int32_t> counts_;
    std::size_t size_ = 0;
};

/// Inclusive index rectangle of successor cells; `lo0 < 0` marks an out-of-domain pair.
struct CellRect {
    std::int32_t lo0 = -1, hi0 = -1, lo1 = -1, hi1 = -1;
    bool in_domain() const { return lo0 >= 0; }
    bool operator==(const CellRect&) const = default;
};

/// Over-approximating finite abstraction of a planar affine system x' = A₂x + B₂u.
class SymbolicAbstraction {
public:
    SymbolicAbstraction(Grid state_grid, Grid input_grid, std::vector<CellRect> table)
        : state_grid_(std::move(state_grid)), input_grid_(std::move(input_grid)),
          table_(std::move(table)) {}

    const Grid& state_grid() const { return state_grid_; }
    const Grid& input_grid() const { return input_grid_; }
    std::size_t num_states() const { return state_grid_.size(); }
    std::size_t num_inputs() const { return input_grid_.size(); }

    const CellRect& rect(std::size_t cell, std::size_t input) const {
        return table_[cell * num_inputs() + input];
    }
    bool in_domain(std::size_t cell, std::size_t input) const { return rect(cell, input).in_domain(); }
    /// Successor cells of (cell, input) in ascending flat order; empty if out of domain.
    std::vector<std::size_t> successors(std::size_t cell, std::size_t input) const;
    const std::vector<CellRect>& table() const { return table_; }

private:
    Grid state_grid_;
    Grid input_grid_;
    std::vector<CellRect> table_;
};

/// OpenMP build over state cells.
SymbolicAbstraction abstract(const DeterministicLti& planar, const Grid& state_grid,
                             const Grid& input_grid);
/// Single-threaded reference build; produces the identical table.
SymbolicAbstraction abstract_serial(const DeterministicLti& planar, const Grid& state_grid,
                                    const Grid& input_grid);

/// Reach-and-stay ("eventually always") target box.
struct ReachStaySpec {
    std::vector<double> lower;
    std::vector<double> upper;
};

enum class Mode : std::uint8_t { reach = 0, stay = 1 };

struct SynthesisTrace {
    std::vector<std::size_t> invariant_sizes; // after each greatest-fixed-point sweep
    std::vector<std::size_t> winning_sizes;   // after each reachability sweep
};

struct SymbolicController {
    Grid state_grid;
    Grid input_grid;
    std::vector<std::uint8_t> winning;   // per state cell
    std::vector<std::uint8_t> invariant; // per state cell, subset of winning
    std::vector<std::int32_t> reach_policy; // input cell per state cell, -1 outside winning
    std::vector<std::int32_t> stay_policy;  // input cell per state cell, -1 outside invariant
    SynthesisTrace trace;

    std::size_t winning_count() const;
    std::size_t invariant_count() const;
    bool is_winning(std::size_t cell) const { return winning[cell] != 0; }
    bool is_invariant(std::size_t cell) const { return invariant[cell] != 0; }
};

/// Target cells: every cell lying inside the box (inward snap). Throws InfeasibleError
/// if none remain.
std::vector<std::uint8_t> snap_target(const Grid& grid, const ReachStaySpec& spec);

/// Maximal controlled-invariant subset of the target, then backward reachability to it.
/// Witness inputs use the smallest input index. Sweeps run in parallel.
SymbolicController synthesize_reach_stay(const SymbolicAbstraction& abs, const ReachStaySpec& spec);
SymbolicController synthesize_reach_stay_serial(const SymbolicAbstraction& abs,
                                                const ReachStaySpec& spec);

struct ControlAction {
    Vector ubar;
    Mode next;
};

/// ū is the center of the selected input cell; next = δ(x̄, q).
ControlAction controller_eval(const SymbolicController& ctrl, const Vector& xbar, Mode q);

} // namespace certkit
