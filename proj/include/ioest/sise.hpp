#pragma once

#include <string>
#include <vector>

#include "ioest/statespace.hpp"

namespace ioest {

/// Recursive state of the simultaneous input and state estimator for plants
/// with H = 0 and rank(CG) = m.
struct SiseFilterState {
  StateSpaceModel sys;
  Vector x_hat;   ///< x_{t|t}
  Matrix P_filt;  ///< P_t = cov(x_t | Y^t)
  int t = 0;
  Vector last_d_hat;  ///< d_{t-1|t}
  Matrix last_X;
  Matrix last_K;
  Matrix last_M;
  /// sigma_min(CG) / sigma_max(CG) below 1e-6 at initialization.
  bool ill_conditioned_cg = false;
};

/// Checks H = 0 and rank(CG) = m (tol 1e-8) and stores the initial estimate.
SiseFilterState sise_init(const StateSpaceModel& sys, const Vector& x0_hat, const Matrix& P0);
SiseFilterState sise_init(const StateSpaceModel& sys, const Vector& x0_hat);  // P0 = I

struct SiseStepOutput {
  Vector d_hat;  ///< d_{t-1|t}
  Vector x_hat;  ///< x_{t|t}
};

/// One step of the recursion:
///   X_t = A P_{t-1} A^T + Q
///   K_t = X_t C^T (C X_t C^T + R)^{-1}
///   M_t = [G^T C^T (C X_t C^T + R)^{-1} C G]^{-1} G^T C^T (C X_t C^T + R)^{-1}
///   P_t = (I - K_t C)[(I - G M_t C) X_t (I - G M_t C)^T + G M_t R M_t^T G^T] + K_t R M_t^T G^T
///   d_{t-1|t} = M_t (y_t - C A x_{t-1|t-1})
///   x_{t|t} = A x_{t-1|t-1} + G d_{t-1|t} + K_t (y_t - C A x_{t-1|t-1} - C G d_{t-1|t})
SiseStepOutput sise_step(SiseFilterState& state, const Vector& y);

struct SiseRunReport {
  /// x_hat[k] = x_{k+1|k+1} after measurement k (measurements are y_1, y_2, ...).
  std::vector<Vector> x_hat;
  /// d_hat[k] = d_{k|k+1}: the estimate produced by measurement k is aligned
  /// with the input one step earlier.
  std::vector<Vector> d_hat;
  std::vector<double> P_trace;
  bool diverged = false;
  int divergence_onset = -1;
  bool ill_conditioned_cg = false;
};

struct SiseRunOptions {
  double overflow_guard = 1e12;
};

/// Iterates sise_step over y_1, ..., y_T. Divergence is reported, not thrown.
SiseRunReport run_sise(SiseFilterState state, const std::vector<Vector>& measurements,
                       const SiseRunOptions& options = {});

}  // namespace ioest
