#pragma once

#include <vector>

#include "ioest/matrixeq.hpp"
#include "ioest/statespace.hpp"

namespace ioest {

/// Steady-state Kalman filter for the plant with the unknown input modelled as
/// white noise of covariance D, i.e. process covariance G D G^T + Q.
struct KalmanSteadyState {
  Matrix Sigma_pred;  ///< prediction error covariance
  Matrix L;           ///< predictor gain A Sigma C^T (C Sigma C^T + R)^{-1}
  Matrix K_filt;      ///< filter gain Sigma C^T (C Sigma C^T + R)^{-1}
  Matrix S_filt;      ///< filtered covariance, S^{-1} = Sigma^{-1} + C^T R^{-1} C
  Matrix Q_total;     ///< G D G^T + Q
  RiccatiSolution dare;
};

KalmanSteadyState kf_highd_steady(const StateSpaceModel& sys, const Matrix& D);

/// Time-varying Kalman filter with the inflated process covariance, or the
/// steady-state filter when constructed from a KalmanSteadyState.
struct KalmanFilterState {
  Matrix A, C, R, Q_total;
  Vector x_pred;  ///< x_{t|t-1}
  Matrix P_pred;  ///< covariance of x_{t|t-1}; unused in steady mode
  bool steady = false;
  Matrix K_steady;
  int t = 0;
};

KalmanFilterState kf_highd_init(const StateSpaceModel& sys, const Matrix& D, const Vector& x0,
                                const Matrix& P0);
KalmanFilterState kf_highd_init_steady(const StateSpaceModel& sys, const KalmanSteadyState& ss,
                                       const Vector& x0);

struct KalmanStepOutput {
  Vector x_filt;      ///< x_{t|t}
  Vector x_pred;      ///< x_{t+1|t}
  Vector innovation;  ///< y_t - C x_{t|t-1}
  Matrix P_filt;      ///< covariance of x_{t|t}; empty in steady mode
};

/// Measurement update with y_t followed by the time update. The covariance
/// update uses the Joseph form so it stays symmetric at large D.
KalmanStepOutput kf_highd_step(KalmanFilterState& state, const Vector& y);

/// Residuals are relative: ||LHS - RHS||_F / (1 + ||LHS||_F), maximized over the grid.
struct ReturnDifferenceResidual {
  double edr = 0.0;    ///< return difference equality
  double facto = 0.0;  ///< [I + C(zI-A)^{-1}L]^{-1} = I - C(zI-A+LC)^{-1}L
};

/// Evaluates, at each grid point z,
///   R + C(zI-A)^{-1} Q (z^{-1}I-A^T)^{-1} C^T
///     = [I + C(zI-A)^{-1}L](C Sigma C^T + R)[I + L^T(z^{-1}I-A^T)^{-1}C^T]
/// and the inverse identity for the return difference.
ReturnDifferenceResidual verify_return_difference(const Matrix& A, const Matrix& C,
                                                  const Matrix& Q, const Matrix& R,
                                                  const Matrix& L, const Matrix& Sigma,
                                                  const FrequencyGrid& grid);

struct EpsilonSweepEntry {
  double epsilon = 0.0;
  Matrix L;
  Matrix Sigma;
  double residual = 0.0;  ///< relative Riccati residual
  /// ||L(eps_k) - L(eps_{k-1})|| / ||L(eps_k)||; zero for the first entry.
  double cauchy = 0.0;
};

struct EpsilonSweep {
  std::vector<EpsilonSweepEntry> entries;
};

/// Steady-state gains for D = D0 / epsilon over strictly decreasing epsilons.
EpsilonSweep epsilon_sweep(const StateSpaceModel& sys, const Matrix& D0,
                           const std::vector<double>& epsilons = {1e-2, 1e-4, 1e-6, 1e-8});

/// The innovations-model factor [I + C(zI-A)^{-1}L] chol(eps (C Sigma C^T + R)),
/// whose paraconjugate product approaches Po Po~ as eps -> 0.
CMatrix innovation_factor(const StateSpaceModel& sys, const KalmanSteadyState& ss, double epsilon,
                          Complex z);

}  // namespace ioest
