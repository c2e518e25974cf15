#pragma once

#include <vector>

#include "ioest/statespace.hpp"

namespace ioest {

/// Second-order statistics of a stationary vector signal x_t.
///
///   R(tau)  = E[(x_t - mean)(x_{t+tau} - mean)^T],  R(-tau) = R(tau)^T
///   Phi(w)  = sum_tau R(tau) e^{-j w tau}
///   R(tau)  = (1/pi) int_0^pi Re[Phi(w) e^{j w tau}] dw
///
/// With this convention a filter f = P d maps spectra as
/// Phi_ff(w) = P(e^{jw}) Phi_dd(w) P(e^{jw})^H.
struct SignalStats {
  Vector mean;
  std::vector<Matrix> autocov;  ///< tau = 0..tau_max
  std::vector<double> omegas;   ///< uniform on [0, pi]
  std::vector<CMatrix> psd;     ///< Phi(omegas[k])

  int dim() const { return static_cast<int>(mean.size()); }
};

/// omega_k = pi k / (count - 1), k = 0..count-1.
std::vector<double> uniform_psd_grid(int count = 512);

struct StatsOptions {
  int tau_max = 128;
  int grid_points = 512;
  int segment_length = 1024;  ///< shortened to the record length when needed
};

/// Sample mean, biased autocovariance (divide by T) and a Welch estimate with a
/// Hann window and 50% overlap. Throws TooFewSamples when T < 10 tau_max.
SignalStats estimate_stats(const std::vector<Vector>& samples, const StatsOptions& options = {});

/// Builds the autocovariance sequence from psd by trapezoidal quadrature.
std::vector<Matrix> autocov_from_psd(const std::vector<double>& omegas,
                                     const std::vector<CMatrix>& psd, int tau_max);

/// f-statistics: f_mean = Pi(1) d_mean, Phi_ff = Pi Phi_dd Pi^H.
SignalStats push_through_inner(const SignalStats& stats_d, const StateSpaceModel& P_inner);

/// d-statistics: d_mean = Pi(1)^T f_mean, Phi_dd = Pi^H Phi_ff Pi.
SignalStats recover_d_stats(const SignalStats& stats_f, const StateSpaceModel& P_inner);

/// Spectrum of d_t = sum_k a_k d_{t-k} + e_t, cov(e) = innovation_cov.
CMatrix ar_spectrum(const std::vector<Matrix>& coeffs, const Matrix& innovation_cov, double omega);

/// Throws GridMismatch unless both statistics use the same frequency grid.
void require_same_grid(const SignalStats& a, const SignalStats& b);

}  // namespace ioest
