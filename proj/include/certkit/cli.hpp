#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "certkit/accuracy.hpp"
#include "certkit/io.hpp"
#include "certkit/refine.hpp"

namespace certkit {

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_solver = 2,
    exit_infeasible = 3,
    exit_simulate = 4,
    exit_casestudy_base = 10, // + number of the first failed criterion
};

struct GridSpec {
    std::vector<double> lower, upper, eta;
};

struct RunConfig {
    std::string preset = "building";
    std::filesystem::path model_path; // overrides the preset when set
    GridSpec state_grid{{15, 15}, {25, 25}, {0.25, 0.25}};
    GridSpec input_grid{{10, 10}, {30, 30}, {1.0, 1.0}};
    ReachStaySpec target{{20.5, 20.5}, {21, 21}};
    bool explicit_gains = false; // otherwise Kalman + LQ
    Matrix K, L;
    Matrix D_H; // empty: no input weight
    InterfaceKind interface = InterfaceKind::sensor_based;
    std::optional<Regime> regime; // default: deterministic iff F, E and P0 vanish
    std::optional<Vector> xbar0, xhat0; // default: preset values, else x0
    std::size_t horizon = 4000;
    std::size_t n_runs = 32;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "certkit-out";
    std::filesystem::path controller_path; // simulate: reuse a synthesized controller
};

/// Applies the keys present in `j` on top of `cfg`.
void apply_config_json(RunConfig& cfg, const Json& j);

StochasticLti load_model(const RunConfig& cfg);

/// Parses argv, runs the sub-command and returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace certkit
