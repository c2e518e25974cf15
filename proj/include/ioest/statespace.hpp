#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ioest/types.hpp"

namespace ioest {

enum class Domain { DiscreteZ, ContinuousS };

/// LTI realization with an unknown-input channel:
///
///   x+ = A x + G d + w,   y = C x + H d + v,   cov(w) = Q_proc, cov(v) = R_meas.
///
/// `x+` is x_{t+1} in the discrete domain and dx/dt in the continuous one.
struct StateSpaceModel {
  Matrix A;
  Matrix G;
  Matrix C;
  Matrix H;
  Domain domain = Domain::DiscreteZ;
  Matrix Q_proc;
  Matrix R_meas;

  StateSpaceModel() = default;

  /// Noise covariances default to zero process noise and identity measurement
  /// noise when left empty.
  StateSpaceModel(Matrix A, Matrix G, Matrix C, Matrix H, Domain domain = Domain::DiscreteZ,
                  Matrix Q_proc = {}, Matrix R_meas = {});

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(G.cols()); }
  int p() const { return static_cast<int>(C.rows()); }

  /// Throws DimensionMismatch / InvalidArgument on inconsistent data.
  void validate(double tol = 1e-10) const;

  bool is_stable() const;
  bool is_discrete() const { return domain == Domain::DiscreteZ; }

  /// Realization of P^T: (A^T, C^T, G^T, H^T).
  StateSpaceModel transposed() const;
};

/// Single-input single-output model in controllable canonical form from
/// polynomial coefficients (highest power first). Requires deg(num) <= deg(den).
StateSpaceModel from_transfer_function(std::span<const double> num, std::span<const double> den,
                                       Domain domain = Domain::DiscreteZ);

/// Real monic polynomial coefficients (highest power first) from roots. Complex
/// roots must appear in conjugate pairs.
std::vector<double> poly_from_roots(std::span<const Complex> roots);

/// Series connection `second * first` (first is applied to the input first).
/// The state is stacked as (x_first, x_second).
StateSpaceModel series(const StateSpaceModel& first, const StateSpaceModel& second);

// --------------------------------------------------------------------------
// Frequency response

/// Evaluation points on the stability boundary.
struct FrequencyGrid {
  Domain domain = Domain::DiscreteZ;
  std::vector<Complex> points;

  std::size_t count() const { return points.size(); }

  /// N points e^{j 2 pi k / N}.
  static FrequencyGrid unit_circle(int count);
  /// N points e^{j theta_k} with theta_k log-spaced in [pi 1e-4, pi]; dense near
  /// omega = 0.
  static FrequencyGrid unit_circle_log(int count);
  /// N points j*omega_k, omega_k = omega0 * tan(theta_k / 2) for the log-spaced
  /// theta_k above (the Tustin image of unit_circle_log).
  static FrequencyGrid imaginary_axis_log(int count, double omega0 = 1.0);
  /// Default verification grid for a domain.
  static FrequencyGrid verification(Domain domain, int count = 256);
};

/// H + C (zI - A)^{-1} G. Throws NearPole when sigma_min(zI - A) < tol.
CMatrix eval_freq(const StateSpaceModel& sys, Complex z, double tol = 1e-12);

/// Paraconjugate value P~(z): P(1/conj(z))^H in discrete time, P(-conj(s))^H in
/// continuous time.
CMatrix eval_paraconjugate(const StateSpaceModel& sys, Complex z, double tol = 1e-12);

// --------------------------------------------------------------------------
// Tustin (bilinear) transform, z = (w0 + s) / (w0 - s)

StateSpaceModel tustin_to_continuous(const StateSpaceModel& sys, double omega0 = 1.0);
StateSpaceModel tustin_to_discrete(const StateSpaceModel& sys, double omega0 = 1.0);

inline Complex tustin_s_to_z(Complex s, double omega0 = 1.0) {
  return (omega0 + s) / (omega0 - s);
}
inline Complex tustin_z_to_s(Complex z, double omega0 = 1.0) {
  return omega0 * (z - 1.0) / (z + 1.0);
}

// --------------------------------------------------------------------------
// Gramians, state reconstruction, structure

struct GramianReport {
  Matrix W_o;
  int horizon = 0;
  int rank = 0;
  double min_eig = 0.0;
  bool invertible = false;
};

/// W_o(N) = sum_{j=0}^{N-1} (A^T)^j C^T C A^j.
GramianReport observability_gramian_finite(const Matrix& A, const Matrix& C, int N);

/// Recovers x_{t-N+1} from N corrected outputs y'_{t-N+1}, ..., y'_t (oldest
/// first), i.e. outputs from which the input, noise and feedthrough
/// contributions have already been removed.
Vector reconstruct_state(const StateSpaceModel& sys, std::span<const Vector> corrected_outputs,
                         int N);

struct MinimalityReport {
  int n = 0;
  int reachability_rank = 0;
  int observability_rank = 0;
  bool minimal = false;
};

MinimalityReport reachability_observability_check(const StateSpaceModel& sys,
                                                  double tol = kRankTol);

/// Markov parameters h_0 = H, h_k = C A^{k-1} G for k = 0..count-1.
std::vector<Matrix> markov_parameters(const StateSpaceModel& sys, int count);

struct DegreeEstimate {
  int degree = 0;
  double gap_ratio = 0.0;
};

/// McMillan degree from the numerical rank of a block Hankel matrix built from
/// h_1, ..., h_{2K-1} (K = 2n blocks). `scale` sets an absolute floor for the
/// relative threshold.
DegreeEstimate hankel_degree(const std::vector<Matrix>& markov, int blocks, double tol,
                             double scale);

struct RegularityReport {
  int macmillan_deg_P = 0;
  int macmillan_deg_PPsim = 0;
  bool regular = false;
  double gap_ratio_P = 0.0;
  double gap_ratio_PPsim = 0.0;
};

/// Estimates delta(P) and delta(P P~). Throws RankAmbiguous when either cut has
/// a singular-value gap below kGapRatio.
RegularityReport regularity_check(const StateSpaceModel& sys, double tol = kRankTol);

/// Transmission zeros of a square plant from the inverse-system state matrix.
std::vector<Complex> transmission_zeros_square(const StateSpaceModel& sys, double tol = kRankTol);

/// Smallest singular value of P(z) over a list of points.
double min_singular_value(const StateSpaceModel& sys, std::span<const Complex> points);

/// Eigenvalues of a real matrix.
std::vector<Complex> eigenvalues(const Matrix& A);

}  // namespace ioest
