// Parallel kernels against their serial references on the building case study.
#include <benchmark/benchmark.h>

#include <memory>

#include "certkit/accuracy.hpp"
#include "certkit/sim.hpp"

using namespace certkit;

namespace {

const DeterministicLti& planar() {
    static const DeterministicLti p = planar_submodel(noiseless(case_study_model()));
    return p;
}

Grid state_grid(double eta) { return Grid({15, 15}, {25, 25}, {eta, eta}); }
Grid input_grid(double eta) { return Grid({10, 10}, {30, 30}, {eta, eta}); }

const ReachStaySpec kTarget{{20.5, 20.5}, {21, 21}};

// state quantization in hundredths: 25 -> 0.25, 10 -> 0.1
double eta_of(const benchmark::State& s) { return static_cast<double>(s.range(0)) / 100.0; }

template <auto Build>
void bm_abstract(benchmark::State& s) {
    const Grid sg = state_grid(eta_of(s)), ig = input_grid(1.0);
    for (auto _ : s) {
        benchmark::DoNotOptimize(Build(planar(), sg, ig));
    }
    s.counters["pairs"] = static_cast<double>(sg.size() * ig.size());
}

template <auto Synth>
void bm_synthesize(benchmark::State& s) {
    const SymbolicAbstraction abs = abstract(planar(), state_grid(eta_of(s)), input_grid(1.0));
    for (auto _ : s) {
        benchmark::DoNotOptimize(Synth(abs, kTarget));
    }
}

const ClosedLoopSystem& case_loop() {
    static const ClosedLoopSystem cls = [] {
        const StochasticLti m = case_study_model();
        const Matrix k = solve_dare_lq(m.A, m.B, m.H, Matrix()).K;
        const Matrix l = solve_dare_kalman(m.A, m.C, m.F, m.E).L;
        const SymbolicAbstraction abs = abstract(planar(), state_grid(0.25), input_grid(1.0));
        auto ctrl = std::make_shared<const SymbolicController>(synthesize_reach_stay(abs, kTarget));
        const Vector x = make_vector({16, 16, 0});
        return compose_closed_loop(m, symbolic_law(ctrl), Observer{l, x}, InterfaceFn::sensor_based(k), x,
                                   Mode::reach);
    }();
    return cls;
}

template <auto Run>
void bm_monte_carlo(benchmark::State& s) {
    MonteCarloOptions opt;
    opt.n_runs = static_cast<std::size_t>(s.range(0));
    for (auto _ : s) {
        benchmark::DoNotOptimize(Run(case_loop(), opt));
    }
}

} // namespace

BENCHMARK(bm_abstract<abstract>)->Name("abstract/parallel")->Arg(25)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_abstract<abstract_serial>)->Name("abstract/serial")->Arg(25)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_synthesize<synthesize_reach_stay>)->Name("synthesize/parallel")->Arg(25)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_synthesize<synthesize_reach_stay_serial>)->Name("synthesize/serial")->Arg(25)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_monte_carlo<monte_carlo>)->Name("monte_carlo/parallel")->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_monte_carlo<monte_carlo_serial>)->Name("monte_carlo/serial")->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
