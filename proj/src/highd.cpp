#include "ioest/highd.hpp"

#include <cmath>

#include "ioest/kernels.hpp"

namespace ioest {

KalmanSteadyState kf_highd_steady(const StateSpaceModel& sys, const Matrix& D) {
  sys.validate();
  if (D.rows() != sys.m() || D.cols() != sys.m()) {
    throw Error(ErrorCode::DimensionMismatch, "D must be m x m");
  }
  KalmanSteadyState ss;
  ss.Q_total = sym(sys.G * D * sys.G.transpose() + sys.Q_proc);
  ss.dare = solve_dare(sys.A, sys.C, ss.Q_total, sys.R_meas);
  ss.Sigma_pred = ss.dare.X;
  ss.L = ss.dare.gain;
  const Matrix Sy = sys.C * ss.Sigma_pred * sys.C.transpose() + sys.R_meas;
  ss.K_filt = Sy.ldlt().solve(sys.C * ss.Sigma_pred).transpose();
  ss.S_filt = sym(ss.Sigma_pred - ss.K_filt * sys.C * ss.Sigma_pred);
  return ss;
}

KalmanFilterState kf_highd_init(const StateSpaceModel& sys, const Matrix& D, const Vector& x0,
                                const Matrix& P0) {
  sys.validate();
  if (x0.size() != sys.n() || P0.rows() != sys.n() || P0.cols() != sys.n() ||
      D.rows() != sys.m() || D.cols() != sys.m()) {
    throw Error(ErrorCode::DimensionMismatch, "Kalman filter initialization");
  }
  KalmanFilterState s;
  s.A = sys.A;
  s.C = sys.C;
  s.R = sys.R_meas;
  s.Q_total = sym(sys.G * D * sys.G.transpose() + sys.Q_proc);
  s.x_pred = x0;
  s.P_pred = P0;
  return s;
}

KalmanFilterState kf_highd_init_steady(const StateSpaceModel& sys, const KalmanSteadyState& ss,
                                       const Vector& x0) {
  if (x0.size() != sys.n()) throw Error(ErrorCode::DimensionMismatch, "Kalman filter initialization");
  KalmanFilterState s;
  s.A = sys.A;
  s.C = sys.C;
  s.R = sys.R_meas;
  s.Q_total = ss.Q_total;
  s.x_pred = x0;
  s.P_pred = ss.Sigma_pred;
  s.steady = true;
  s.K_steady = ss.K_filt;
  return s;
}

KalmanStepOutput kf_highd_step(KalmanFilterState& s, const Vector& y) {
  if (y.size() != s.C.rows()) throw Error(ErrorCode::DimensionMismatch, "measurement has wrong size");
  KalmanStepOutput out;
  out.innovation = y - s.C * s.x_pred;
  if (s.steady) {
    out.x_filt = s.x_pred + s.K_steady * out.innovation;
  } else {
    const Matrix Sy = s.C * s.P_pred * s.C.transpose() + s.R;
    const Matrix K = Sy.ldlt().solve(s.C * s.P_pred).transpose();
    out.x_filt = s.x_pred + K * out.innovation;
    const Matrix IKC = Matrix::Identity(s.A.rows(), s.A.rows()) - K * s.C;
    out.P_filt = sym(IKC * s.P_pred * IKC.transpose() + K * s.R * K.transpose());
    s.P_pred = sym(s.A * out.P_filt * s.A.transpose() + s.Q_total);
  }
  s.x_pred = s.A * out.x_filt;
  out.x_pred = s.x_pred;
  ++s.t;
  return out;
}

ReturnDifferenceResidual verify_return_difference(const Matrix& A, const Matrix& C,
                                                  const Matrix& Q, const Matrix& R,
                                                  const Matrix& L, const Matrix& Sigma,
                                                  const FrequencyGrid& grid) {
  const auto n = A.rows();
  const auto p = C.rows();
  const CMatrix Ac = A.cast<Complex>();
  const CMatrix Cc = C.cast<Complex>();
  const CMatrix Lc = L.cast<Complex>();
  const CMatrix Qc = Q.cast<Complex>();
  const CMatrix Rc = R.cast<Complex>();
  const CMatrix Sy = (C * Sigma * C.transpose() + R).cast<Complex>();
  const CMatrix In = CMatrix::Identity(n, n);
  const CMatrix Ip = CMatrix::Identity(p, p);

  const auto at = [&](std::size_t k, bool edr) {
    const Complex z = grid.points[k];
    const CMatrix Fz = (z * In - Ac).partialPivLu().solve(In);                    // (zI - A)^{-1}
    const CMatrix Fzi = (1.0 / z * In - Ac.transpose()).partialPivLu().solve(In);  // (z^{-1}I - A^T)^{-1}
    const CMatrix ret = Ip + Cc * Fz * Lc;
    if (edr) {
      const CMatrix lhs = Rc + Cc * Fz * Qc * Fzi * Cc.transpose();
      const CMatrix rhs = ret * Sy * (Ip + Lc.transpose() * Fzi * Cc.transpose());
      return (lhs - rhs).norm() / (1.0 + lhs.norm());
    }
    const CMatrix lhs = ret.partialPivLu().solve(Ip);
    const CMatrix rhs = Ip - Cc * (z * In - Ac + Lc * Cc).partialPivLu().solve(Lc);
    return (lhs - rhs).norm() / (1.0 + lhs.norm());
  };
  ReturnDifferenceResidual res;
  if (grid.count() == 0) return res;
  res.edr = kernels::max_over(grid.count(), [&](std::size_t k) { return at(k, true); });
  res.facto = kernels::max_over(grid.count(), [&](std::size_t k) { return at(k, false); });
  return res;
}

EpsilonSweep epsilon_sweep(const StateSpaceModel& sys, const Matrix& D0,
                           const std::vector<double>& epsilons) {
  for (std::size_t i = 1; i < epsilons.size(); ++i) {
    if (!(epsilons[i] < epsilons[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "epsilons must be strictly decreasing");
    }
  }
  if (numerical_rank(D0).rank < sys.m()) {
    throw Error(ErrorCode::InvalidArgument, "D0 must have rank m");
  }
  EpsilonSweep sweep;
  for (double eps : epsilons) {
    if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
    const KalmanSteadyState ss = kf_highd_steady(sys, D0 / eps);
    EpsilonSweepEntry e;
    e.epsilon = eps;
    e.L = ss.L;
    e.Sigma = ss.Sigma_pred;
    e.residual = ss.dare.residual_norm / (1.0 + ss.Sigma_pred.norm());
    if (!sweep.entries.empty()) {
      e.cauchy = (e.L - sweep.entries.back().L).norm() / e.L.norm();
    }
    sweep.entries.push_back(std::move(e));
  }
  return sweep;
}

CMatrix innovation_factor(const StateSpaceModel& sys, const KalmanSteadyState& ss, double epsilon,
                          Complex z) {
  const StateSpaceModel ret(sys.A, ss.L, sys.C, Matrix::Identity(sys.p(), sys.p()), sys.domain);
  const Matrix Sy = epsilon * (sys.C * ss.Sigma_pred * sys.C.transpose() + sys.R_meas);
  const Matrix chol = Sy.llt().matrixL();
  return eval_freq(ret, z) * chol.cast<Complex>();
}

}  // namespace ioest
