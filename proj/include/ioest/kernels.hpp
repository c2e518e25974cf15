#pragma once

// Data-parallel inner loops. Every OpenMP kernel has a serial twin with the same
// signature; the test suite checks that both produce bit-identical results and
// bench/ compares their throughput.
//
// Reductions are restricted to max/min (order independent) or to per-index
// outputs written in place, so parallel results never depend on scheduling.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "ioest/types.hpp"

namespace ioest::kernels {

/// max_k f(k) for k in [0, count). Returns -inf for count == 0.
template <class F>
double max_over_serial(std::size_t count, F&& f) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < count; ++k) best = std::max(best, f(k));
  return best;
}

template <class F>
double max_over(std::size_t count, F&& f) {
  double best = -std::numeric_limits<double>::infinity();
  const auto n = static_cast<long long>(count);
#pragma omp parallel for reduction(max : best) schedule(static)
  for (long long k = 0; k < n; ++k) {
    best = std::max(best, f(static_cast<std::size_t>(k)));
  }
  return best;
}

template <class F>
double min_over_serial(std::size_t count, F&& f) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < count; ++k) best = std::min(best, f(k));
  return best;
}

template <class F>
double min_over(std::size_t count, F&& f) {
  double best = std::numeric_limits<double>::infinity();
  const auto n = static_cast<long long>(count);
#pragma omp parallel for reduction(min : best) schedule(static)
  for (long long k = 0; k < n; ++k) {
    best = std::min(best, f(static_cast<std::size_t>(k)));
  }
  return best;
}

/// out[k] = f(k). `T` must be default constructible.
template <class T, class F>
std::vector<T> map_serial(std::size_t count, F&& f) {
  std::vector<T> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = f(k);
  return out;
}

template <class T, class F>
std::vector<T> map(std::size_t count, F&& f) {
  std::vector<T> out(count);
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic)
  for (long long k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(k)] = f(static_cast<std::size_t>(k));
  }
  return out;
}

/// Averaged cross-periodogram of a multichannel record at arbitrary angular
/// frequencies. `samples` is (channels x T), already mean-removed. Segments of
/// `segment_length` with `hop` stride are tapered by `window`; the result for
/// frequency w is
///
///   Phi(w) = 1 / (K * sum(window^2)) * sum_segments X(w) X(w)^H,
///   X(w) = sum_t window_t x_t e^{-j w t}.
///
/// Each frequency is independent; the segment sum is always accumulated in
/// order.
std::vector<CMatrix> welch_cross_spectra_serial(const Matrix& samples, const Vector& window,
                                                int hop, const std::vector<double>& omegas);
std::vector<CMatrix> welch_cross_spectra(const Matrix& samples, const Vector& window, int hop,
                                         const std::vector<double>& omegas);

}  // namespace ioest::kernels
