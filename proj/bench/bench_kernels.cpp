#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ioest/inputstats.hpp"
#include "ioest/kernels.hpp"
#include "ioest/statespace.hpp"

using namespace ioest;

namespace {

Matrix noise(int rows, int cols) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N;
  Matrix x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = N(rng);
  return x;
}

Vector hann(int L) {
  Vector w(L);
  for (int t = 0; t < L; ++t) w(t) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * t / L);
  return w;
}

StateSpaceModel system(int n) {
  Matrix A = noise(n, n);
  A *= 0.9 / spectral_radius(A);
  return StateSpaceModel(A, noise(n, 2), noise(2, n), noise(2, 2));
}

template <bool Parallel>
void BM_Welch(benchmark::State& state) {
  const Matrix x = noise(2, static_cast<int>(state.range(0)));
  const Vector w = hann(1024);
  const auto omegas = uniform_psd_grid(512);
  for (auto _ : state) {
    auto r = Parallel ? kernels::welch_cross_spectra(x, w, 512, omegas)
                      : kernels::welch_cross_spectra_serial(x, w, 512, omegas);
    benchmark::DoNotOptimize(r);
  }
}

template <bool Parallel>
void BM_GridMax(benchmark::State& state) {
  const StateSpaceModel s = system(static_cast<int>(state.range(0)));
  const FrequencyGrid g = FrequencyGrid::unit_circle(1024);
  const auto f = [&](std::size_t k) { return eval_freq(s, g.points[k]).norm(); };
  for (auto _ : state) {
    double v = Parallel ? kernels::max_over(g.count(), f) : kernels::max_over_serial(g.count(), f);
    benchmark::DoNotOptimize(v);
  }
}

}  // namespace

BENCHMARK(BM_Welch<false>)->Arg(1 << 14)->Arg(1 << 16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Welch<true>)->Arg(1 << 14)->Arg(1 << 16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GridMax<false>)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GridMax<true>)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
