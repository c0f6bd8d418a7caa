#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "robinhom/assembly.hpp"
#include "robinhom/cellmesh.hpp"
#include "robinhom/cellspec.hpp"
#include "robinhom/homog.hpp"

using namespace robinhom;

static void BM_cell_mesh(benchmark::State& state)
{
    const int level = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(build_cell_mesh(0.25, level, OuterMode::periodic));
}
BENCHMARK(BM_cell_mesh)->DenseRange(1, 4)->Unit(benchmark::kMillisecond);

static void BM_cell_forms(benchmark::State& state)
{
    const CellMesh m = build_cell_mesh(0.25, static_cast<int>(state.range(0)), OuterMode::periodic);
    for (auto _ : state)
        benchmark::DoNotOptimize(assemble_cell_forms(m));
    state.counters["dofs"] = static_cast<double>(assemble_cell_forms(m).num_dofs());
}
BENCHMARK(BM_cell_forms)->DenseRange(1, 4)->Unit(benchmark::kMillisecond);

static void BM_perforated_cg(benchmark::State& state)
{
    const int N = static_cast<int>(state.range(0));
    const double eps = 1.0 / N;
    auto cell = std::make_shared<const CellMesh>(build_cell_mesh(cell_hole_radius(eps, 3, 3), 2, OuterMode::periodic));
    const PerforatedMesh pm = build_perforated_mesh(N, cell);
    const DomainForms df = assemble_domain_forms(pm);
    const double mu = mu_coeff(eps, 3, cell->hole_radius);
    const double pi = std::numbers::pi;
    for (auto _ : state)
        benchmark::DoNotOptimize(solve_perforated(pm, df, 0.0, 4 * pi, mu, sine_load(3 * pi * pi + 2 * pi)));
    state.counters["nodes"] = static_cast<double>(pm.nodes.size());
}
BENCHMARK(BM_perforated_cg)->DenseRange(2, 4)->Unit(benchmark::kMillisecond);

static void BM_pencil(benchmark::State& state)
{
    const double kappa = state.range(0) / 10.0;
    const CellMesh m = build_cell_mesh(0.25, static_cast<int>(state.range(1)), OuterMode::periodic);
    const FormSet f = assemble_cell_forms(m);
    for (auto _ : state)
        benchmark::DoNotOptimize(lambda_eps_kappa(m, f, kappa, default_shift(0.25, kappa)));
}
BENCHMARK(BM_pencil)->ArgsProduct({{5, 20}, {1, 2, 3}})->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
