#include <benchmark/benchmark.h>

#include <random>

#include "mfgfem/fem.hpp"
#include "mfgfem/hamiltonian.hpp"
#include "mfgfem/solver.hpp"

namespace {

using namespace mfgfem;

SpacePtr square_space(int level) {
  return std::make_shared<P1Space>(build_level(DomainTag::UnitSquare, level));
}

void BM_AssembleStiffness(benchmark::State& state) {
  const SpacePtr space = square_space(static_cast<int>(state.range(0)));
  const Stabilization stab = build_stabilization(*space, 1.0, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_stiffness(*space, 1.0, stab));
  state.counters["dofs"] = static_cast<double>(space->n_dofs());
}
BENCHMARK(BM_AssembleStiffness)->Arg(5)->Arg(7);

void BM_AssembleConvection(benchmark::State& state) {
  const SpacePtr space = square_space(static_cast<int>(state.range(0)));
  const DriftSamples drift = constant_drift(*space, {0.6, -0.8});
  for (auto _ : state) benchmark::DoNotOptimize(assemble_convection(*space, drift));
}
BENCHMARK(BM_AssembleConvection)->Arg(5)->Arg(7);

void BM_Prox(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  auto ham = std::make_shared<const PolyhedralHamiltonian>(PolyhedralHamiltonian::max_norm(dim));
  const MoreauEnvelope env(ham, 0.25);
  std::mt19937 rng(7);
  std::normal_distribution<double> normal;
  std::vector<SmallVec> points;
  for (int i = 0; i < 256; ++i) {
    SmallVec p(dim);
    for (int k = 0; k < dim; ++k) p[k] = normal(rng);
    points.push_back(p);
  }
  const SmallVec x = SmallVec::Zero(dim);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(env.prox(x, points[i++ % points.size()]));
}
BENCHMARK(BM_Prox)->Arg(1)->Arg(2)->Arg(3);

void BM_LinearSolve(benchmark::State& state) {
  const SpacePtr space = square_space(static_cast<int>(state.range(0)));
  const SparseOperator op = assemble_stiffness(*space, 1.0, build_stabilization(*space, 1.0, 0.5)) +
                            assemble_convection(*space, constant_drift(*space, {0.6, -0.8}));
  const Vec rhs = Vec::Ones(op.size());
  for (auto _ : state) benchmark::DoNotOptimize(linear_solve(op, rhs));
  state.counters["dofs"] = static_cast<double>(space->n_dofs());
}
BENCHMARK(BM_LinearSolve)->Arg(5)->Arg(7)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
