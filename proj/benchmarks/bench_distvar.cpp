#include "distvar/conic.hpp"
#include "distvar/distflow.hpp"
#include "distvar/opf.hpp"
#include "distvar/oracle.hpp"
#include "distvar/study.hpp"

#include "feeders.hpp"
#include "planted.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace distvar;

namespace {

const FeederModel& bundled_feeder()
{
    static const FeederModel model = load_feeder(DISTVAR_BUNDLED_FEEDER);
    return model;
}

Scenario bundled_scenario(double load, double pv_mw)
{
    Scenario sc;
    sc.load_scale = load;
    sc.pv_output = {bundled_feeder().bases().mva_to_pu(pv_mw)};
    sc.cap_states.assign(bundled_feeder().capacitor_buses().size(), false);
    return sc;
}

} // namespace

static void SweepSolve(benchmark::State& state)
{
    const auto inj = bundled_scenario(0.01 * static_cast<double>(state.range(0)), 2.5).injections(bundled_feeder());
    for (auto _ : state) {
        auto st = sweep_solve(bundled_feeder(), inj);
        benchmark::DoNotOptimize(st.nu.data());
    }
}
BENCHMARK(SweepSolve)->Arg(20)->Arg(100);

static void AssembleSocp(benchmark::State& state)
{
    const auto sc = bundled_scenario(0.2, 2.5);
    for (auto _ : state) {
        auto as = assemble_socp(bundled_feeder(), sc);
        benchmark::DoNotOptimize(as.program.c.data());
    }
}
BENCHMARK(AssembleSocp);

// One operating point on the bundled feeder, load in percent.
static void SolveOpf(benchmark::State& state)
{
    const auto sc = bundled_scenario(0.01 * static_cast<double>(state.range(0)), 0.5 * static_cast<double>(state.range(1)));
    for (auto _ : state) {
        auto sol = solve_opf(bundled_feeder(), sc);
        benchmark::DoNotOptimize(sol.objective);
    }
}
BENCHMARK(SolveOpf)->Args({10, 6})->Args({20, 5})->Args({100, 2})->Unit(benchmark::kMillisecond);

static void SolveOpfRandomFeeder(benchmark::State& state)
{
    std::mt19937_64 rng(11);
    const auto model = testing::random_feeder(rng, static_cast<int>(state.range(0)));
    Scenario sc;
    sc.load_scale = 0.3;
    sc.pv_output = {0.5 * model.buses()[model.inverter_buses()[0]].inverter->s_rated};
    for (auto _ : state) {
        auto sol = solve_opf(model, sc);
        benchmark::DoNotOptimize(sol.objective);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(SolveOpfRandomFeeder)->RangeMultiplier(2)->Range(16, 256)->Complexity()->Unit(benchmark::kMillisecond);

static void ConicPlanted(benchmark::State& state)
{
    std::mt19937_64 rng(5);
    const auto planted = testing::make_planted(rng, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto sol = conic::solve_conic(planted.prog);
        benchmark::DoNotOptimize(sol.x.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(ConicPlanted)->RangeMultiplier(2)->Range(32, 512)->Complexity()->Unit(benchmark::kMillisecond);

static void BruteForceOracle(benchmark::State& state)
{
    const auto sc = bundled_scenario(0.2, 2.5);
    OracleSettings os;
    os.grid_steps = static_cast<int>(state.range(0));
    os.workers = 1;
    for (auto _ : state) {
        auto orc = brute_force_opf(bundled_feeder(), sc, os);
        benchmark::DoNotOptimize(orc.objective_best);
    }
}
BENCHMARK(BruteForceOracle)->Arg(201)->Arg(2001)->Unit(benchmark::kMillisecond);

static void PvSweep(benchmark::State& state)
{
    SweepSpec spec;
    spec.hi = bundled_feeder().bases().mva_to_pu(5.0);
    spec.base = bundled_scenario(0.1, 0.0);
    spec.workers = static_cast<unsigned>(state.range(0));
    for (auto _ : state) {
        auto res = sweep_pv(bundled_feeder(), spec);
        benchmark::DoNotOptimize(res.rows.data());
    }
}
BENCHMARK(PvSweep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

static void TimeseriesDay(benchmark::State& state)
{
    const auto day = synth_profile(DayClass::intermittent_cloudy, 3, static_cast<double>(state.range(0)));
    TimeseriesSpec spec;
    spec.workers = 1;
    for (auto _ : state) {
        auto rep = run_timeseries(bundled_feeder(), {day}, spec);
        benchmark::DoNotOptimize(rep.rows.data());
    }
}
BENCHMARK(TimeseriesDay)->Arg(60)->Arg(15)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
