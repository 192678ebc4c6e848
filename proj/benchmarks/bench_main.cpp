#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "ordflow/burgers.hpp"
#include "ordflow/continuity.hpp"
#include "ordflow/flow.hpp"
#include "ordflow/monotone.hpp"
#include "ordflow/nonlinear.hpp"
#include "ordflow/regularize.hpp"
#include "ordflow/stochastic.hpp"
#include "ordflow/transport.hpp"
#include "ordflow/velocity.hpp"

using namespace ordflow;

namespace {

GridFunction ramp(const Grid& g) {
  return GridFunction::sample(
      g, [](std::span<const double> x) { return std::tanh(4 * x[0]) + (x.size() > 1 ? x[1] : 0.0); },
      Monotonicity::increasing);
}

void BM_SupConvolution(benchmark::State& s) {
  const Grid g = Grid::line(-1, 1, static_cast<std::size_t>(s.range(0)));
  const auto phi = ramp(g);
  for (auto _ : s) benchmark::DoNotOptimize(sup_convolution(phi, 4 * g.spacing(0)));
  s.SetComplexityN(s.range(0));
}
BENCHMARK(BM_SupConvolution)->RangeMultiplier(2)->Range(256, 2048)->Complexity();

void BM_Mollify2D(benchmark::State& s) {
  const auto n = static_cast<std::size_t>(s.range(0));
  const Grid g = Grid::box({-1, -1}, {1, 1}, {n, n});
  const auto phi = ramp(g);
  const MollifierKernel k(g, 4 * g.spacing(0), KernelSide::upper);
  for (auto _ : s) benchmark::DoNotOptimize(one_sided_mollify(phi, k));
}
BENCHMARK(BM_Mollify2D)->Arg(41)->Arg(81);

void BM_AbvNorm(benchmark::State& s) {
  const auto n = static_cast<std::size_t>(s.range(0));
  const Grid g = Grid::box({-1, -1}, {1, 1}, {n, n});
  const auto phi = GridFunction::sample(g, [](std::span<const double> x) { return std::sin(3 * x[0]) * x[1]; });
  for (auto _ : s) benchmark::DoNotOptimize(abv_norm(phi, g.lower_corner(), g.upper_corner()));
}
BENCHMARK(BM_AbvNorm)->Arg(64)->Arg(256);

void BM_MaximalMinimalFlow(benchmark::State& s) {
  const Grid g = Grid::line(-2, 2, static_cast<std::size_t>(s.range(0)));
  const double h = g.spacing(0);
  const auto sched = default_eps_schedule(8 * h, 2 * h);
  const auto b = sign_field();
  for (auto _ : s) benchmark::DoNotOptimize(maximal_minimal_flow(*b, 0.0, std::vector<double>{1.0}, g, sched));
}
BENCHMARK(BM_MaximalMinimalFlow)->Arg(201)->Arg(401)->Unit(benchmark::kMillisecond);

void BM_TransportSolve(benchmark::State& s) {
  const Grid g = Grid::line(-2, 2, static_cast<std::size_t>(s.range(0)));
  TransportProblem p;
  p.b = sign_field();
  p.terminal = [](std::span<const double> x, std::span<double> o) { o[0] = x[0] <= 0 ? 1.0 : 0.0; };
  p.terminal_tag = Monotonicity::decreasing;
  const std::vector<double> times{0.0, 0.5, 1.0};
  for (auto _ : s) benchmark::DoNotOptimize(solve_transport(p, g, times));
}
BENCHMARK(BM_TransportSolve)->Arg(201)->Arg(401)->Unit(benchmark::kMillisecond);

void BM_Pushforward(benchmark::State& s) {
  const Grid g = Grid::line(-3, 3, 301);
  PushforwardOptions o;
  o.particles = static_cast<std::size_t>(s.range(0));
  const ScalarFn f0 = [](std::span<const double> x) { return std::abs(x[0]) <= 1 ? 0.5 : 0.0; };
  for (auto _ : s) benchmark::DoNotOptimize(pushforward_solve(*sign_field(), g, f0, std::vector<double>{1.0}, o));
  s.SetItemsProcessed(s.iterations() * s.range(0));
}
BENCHMARK(BM_Pushforward)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_EulerMaruyama(benchmark::State& s) {
  const std::vector<double> starts{-0.5, 0.0, 0.5}, times{1.0};
  EmOptions o;
  o.field_grid = Grid::line(-4, 4, 401);
  const auto noise = NoiseSpec::additive(1, 0.2);
  const auto paths = static_cast<std::size_t>(s.range(0));
  for (auto _ : s)
    benchmark::DoNotOptimize(em_flow(*sign_field(), noise, FlowSide::upper, 0.04, 0.0, times, starts, paths, 1, o));
  s.SetItemsProcessed(s.iterations() * s.range(0) * 3);
}
BENCHMARK(BM_EulerMaruyama)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_BurgersExtremal(benchmark::State& s) {
  const Grid g = Grid::line(-2, 2, static_cast<std::size_t>(s.range(0)));
  std::vector<double> times;
  for (int k = 0; k <= 10; ++k) times.push_back(0.1 * k);
  times.back() = 1.0;
  const VectorFn uT = [](std::span<const double> x, std::span<double> o) { o[0] = x[0] <= 0 ? 1.0 : 0.0; };
  for (auto _ : s)
    benchmark::DoNotOptimize(solve_extremal(Nonlinearity::burgers(), uT, g, times, LatticeDirection::from_top));
}
BENCHMARK(BM_BurgersExtremal)->Arg(201)->Arg(401)->Unit(benchmark::kMillisecond);

void BM_ViscousSolve(benchmark::State& s) {
  const double eps = 1.0 / static_cast<double>(s.range(0));
  const double h = eps / 4;
  const Grid g = Grid::line(-1, 1.5, static_cast<std::size_t>(std::lround(2.5 / h)) + 1);
  const auto prof = theta_for_path(ShockPath::linear(0.75));
  for (auto _ : s) benchmark::DoNotOptimize(viscous_solve(prof, eps, g));
}
BENCHMARK(BM_ViscousSolve)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
