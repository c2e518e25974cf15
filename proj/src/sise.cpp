#include "ioest/sise.hpp"

#include <cmath>
#include <limits>

namespace ioest {

SiseFilterState sise_init(const StateSpaceModel& sys, const Vector& x0_hat, const Matrix& P0) {
  sys.validate();
  if (!sys.is_discrete()) throw Error(ErrorCode::InvalidArgument, "SISE needs a discrete plant");
  if (sys.H.norm() > 1e-12 * (1.0 + sys.C.norm() * sys.G.norm())) {
    throw Error(ErrorCode::AssumptionHNotZero, "SISE recursion requires H = 0");
  }
  const Matrix CG = sys.C * sys.G;
  const RankInfo r = numerical_rank(CG, 1e-8);
  if (r.rank < sys.m()) {
    throw Error(ErrorCode::RankCGDeficient, "rank(CG) = " + std::to_string(r.rank) +
                                                " < m = " + std::to_string(sys.m()));
  }
  if (x0_hat.size() != sys.n() || P0.rows() != sys.n() || P0.cols() != sys.n()) {
    throw Error(ErrorCode::DimensionMismatch, "initial estimate has wrong dimensions");
  }
  SiseFilterState s;
  s.sys = sys;
  s.sys.H = Matrix::Zero(sys.p(), sys.m());
  s.x_hat = x0_hat;
  s.P_filt = P0;
  s.last_d_hat = Vector::Zero(sys.m());
  Eigen::JacobiSVD<Matrix> svd(CG);
  const Vector& sv = svd.singularValues();
  s.ill_conditioned_cg = sv.size() > 0 && sv(sv.size() - 1) < 1e-6 * sv(0);
  return s;
}

SiseFilterState sise_init(const StateSpaceModel& sys, const Vector& x0_hat) {
  return sise_init(sys, x0_hat, Matrix::Identity(sys.n(), sys.n()));
}

SiseStepOutput sise_step(SiseFilterState& s, const Vector& y) {
  const StateSpaceModel& sys = s.sys;
  if (y.size() != sys.p()) throw Error(ErrorCode::DimensionMismatch, "measurement has wrong size");
  const Matrix& A = sys.A;
  const Matrix& G = sys.G;
  const Matrix& C = sys.C;
  const Matrix& R = sys.R_meas;
  const auto n = sys.n();

  const Matrix X = A * s.P_filt * A.transpose() + sys.Q_proc;
  const Matrix S = C * X * C.transpose() + R;
  const auto Slu = S.partialPivLu();
  if (!(std::abs(Slu.determinant()) > 0.0) || Slu.rcond() < 1e-15) {
    throw Error(ErrorCode::InnovationGramSingular, "C X C^T + R is singular");
  }
  const Matrix K = Slu.solve(C * X).transpose();  // X C^T S^{-1}; S and X symmetric
  const Matrix F = C * G;
  const Matrix SinvF = Slu.solve(F);
  const Matrix M = (F.transpose() * SinvF).partialPivLu().solve(SinvF.transpose());

  const Matrix I = Matrix::Identity(n, n);
  const Matrix IGMC = I - G * M * C;
  const Matrix GM = G * M;
  // Symmetric in exact arithmetic; without sym() the skew part of the round-off
  // can grow geometrically.
  s.P_filt = sym((I - K * C) * (IGMC * X * IGMC.transpose() + GM * R * GM.transpose()) +
                 K * R * GM.transpose());

  const Vector pred = C * (A * s.x_hat);
  const Vector d_hat = M * (y - pred);
  s.x_hat = A * s.x_hat + G * d_hat + K * (y - pred - F * d_hat);
  s.last_d_hat = d_hat;
  s.last_X = X;
  s.last_K = K;
  s.last_M = M;
  ++s.t;
  return {d_hat, s.x_hat};
}

SiseRunReport run_sise(SiseFilterState state, const std::vector<Vector>& measurements,
                       const SiseRunOptions& options) {
  SiseRunReport rep;
  rep.ill_conditioned_cg = state.ill_conditioned_cg;
  rep.x_hat.reserve(measurements.size());
  rep.d_hat.reserve(measurements.size());
  rep.P_trace.reserve(measurements.size());
  for (std::size_t k = 0; k < measurements.size(); ++k) {
    SiseStepOutput out;
    try {
      out = sise_step(state, measurements[k]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InnovationGramSingular || !rep.diverged) throw;
      out.x_hat = state.x_hat;
      out.d_hat = state.last_d_hat;
    }
    const double tr = state.P_filt.trace();
    const bool blown = !(tr <= options.overflow_guard) || !(out.x_hat.norm() <= options.overflow_guard);
    if (blown && !rep.diverged) {
      rep.diverged = true;
      rep.divergence_onset = static_cast<int>(k);
    }
    rep.x_hat.push_back(std::move(out.x_hat));
    rep.d_hat.push_back(std::move(out.d_hat));
    rep.P_trace.push_back(std::isfinite(tr) ? tr : std::numeric_limits<double>::max());
  }
  return rep;
}

}  // namespace ioest
