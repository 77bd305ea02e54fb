#include <vector>

#include <Eigen/Dense>
#include <benchmark/benchmark.h>

#include "l96cal/dynamics.hpp"
#include "l96cal/eki.hpp"
#include "l96cal/random.hpp"
#include "l96cal/rk4.hpp"
#include "l96cal/statistics.hpp"

using namespace l96cal;

namespace {

std::vector<double> flat_state(const SystemShape& shape) {
  const auto st = random_initial_state(shape, 1);
  std::vector<double> u(st.X);
  u.insert(u.end(), st.Y.begin(), st.Y.end());
  return u;
}

void BM_FullTendency(benchmark::State& state) {
  const SystemShape shape{static_cast<int>(state.range(0)), 10};
  const auto u = flat_state(shape);
  std::vector<double> du(u.size());
  for (auto _ : state) {
    full_tendency_flat(u, du, Params::truth(), shape);
    benchmark::DoNotOptimize(du.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(u.size()));
}
BENCHMARK(BM_FullTendency)->Arg(8)->Arg(36)->Arg(144);

void BM_Rk4Step(benchmark::State& state) {
  const SystemShape shape{36, 10};
  auto u = flat_state(shape);
  Rk4Stepper rk(u.size());
  const Params p = Params::truth();
  auto rhs = [&](std::span<const double> x, std::span<double> dx) { full_tendency_flat(x, dx, p, shape); };
  for (auto _ : state) {
    rk.step(u, 1e-3, rhs);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_Rk4Step);

void BM_MomentF(benchmark::State& state) {
  const SystemShape shape{36, 10};
  const auto st = random_initial_state(shape, 2);
  std::vector<double> out(5 * 36);
  for (auto _ : state) {
    moment_f(st.X, st.Y, shape, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_MomentF);

/// One ensemble update at the paper's sizes: 4 parameters, 180 moments.
void BM_EkiUpdate(benchmark::State& state) {
  const auto M = static_cast<Eigen::Index>(state.range(0));
  Rng rng(3);
  Eigen::MatrixXd theta(4, M), W(180, M);
  for (Eigen::Index j = 0; j < M; ++j) {
    for (Eigen::Index i = 0; i < 4; ++i) theta(i, j) = standard_normal(rng);
    for (Eigen::Index i = 0; i < 180; ++i) W(i, j) = standard_normal(rng);
  }
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(180);
  const Eigen::VectorXd noise = Eigen::VectorXd::Constant(180, 0.25);
  for (auto _ : state) {
    Rng perturb(4);
    auto out = eki_update(theta, W, y, noise, &perturb);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_EkiUpdate)->Arg(10)->Arg(100);

}  // namespace
BENCHMARK_MAIN();
