#include "ioest/inputstats.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ioest/kernels.hpp"

namespace ioest {
namespace {

void check_grid(const SignalStats& s, const StateSpaceModel& Pi) {
  if (s.omegas.size() != s.psd.size() || s.omegas.size() < 2) {
    throw Error(ErrorCode::GridMismatch, "psd and frequency grid have different lengths");
  }
  if (Pi.m() != s.dim() || Pi.p() != s.dim()) {
    throw Error(ErrorCode::GridMismatch, "inner factor is " + std::to_string(Pi.p()) + "x" +
                                             std::to_string(Pi.m()) + " but statistics have dimension " +
                                             std::to_string(s.dim()));
  }
  for (const CMatrix& P : s.psd) {
    if (P.rows() != s.dim() || P.cols() != s.dim()) {
      throw Error(ErrorCode::GridMismatch, "psd sample has wrong dimension");
    }
  }
  if (!Pi.is_discrete()) throw Error(ErrorCode::InvalidArgument, "inner factor must be discrete");
}

Matrix real_at_one(const StateSpaceModel& Pi) {
  const CMatrix P1 = eval_freq(Pi, Complex(1.0, 0.0));
  if (P1.imag().norm() > 1e-12 * (1.0 + P1.norm())) {
    throw Error(ErrorCode::InvalidArgument, "inner factor is not real at z = 1");
  }
  return P1.real();
}

SignalStats congruence(const SignalStats& in, const StateSpaceModel& Pi, bool forward) {
  check_grid(in, Pi);
  SignalStats out;
  const Matrix P1 = real_at_one(Pi);
  out.mean = forward ? Vector(P1 * in.mean) : Vector(P1.transpose() * in.mean);
  out.omegas = in.omegas;
  out.psd = kernels::map<CMatrix>(in.omegas.size(), [&](std::size_t k) {
    const CMatrix P = eval_freq(Pi, std::polar(1.0, in.omegas[k]));
    const CMatrix Phi = forward ? CMatrix(P * in.psd[k] * P.adjoint())
                                : CMatrix(P.adjoint() * in.psd[k] * P);
    return CMatrix(0.5 * (Phi + Phi.adjoint()));
  });
  const int tau_max = in.autocov.empty() ? 0 : static_cast<int>(in.autocov.size()) - 1;
  out.autocov = autocov_from_psd(out.omegas, out.psd, tau_max);
  return out;
}

}  // namespace

std::vector<double> uniform_psd_grid(int count) {
  if (count < 2) throw Error(ErrorCode::InvalidArgument, "psd grid needs at least 2 points");
  std::vector<double> w(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) w[k] = std::numbers::pi * k / (count - 1);
  return w;
}

SignalStats estimate_stats(const std::vector<Vector>& samples, const StatsOptions& opt) {
  if (opt.tau_max < 0) throw Error(ErrorCode::InvalidArgument, "tau_max must be nonnegative");
  const auto T = static_cast<Eigen::Index>(samples.size());
  if (T == 0 || T < 10 * static_cast<Eigen::Index>(opt.tau_max) || T < 2) {
    throw Error(ErrorCode::TooFewSamples, "need at least 10 tau_max = " +
                                              std::to_string(10 * opt.tau_max) + " samples, got " +
                                              std::to_string(T));
  }
  const Eigen::Index dim = samples.front().size();
  Matrix X(dim, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    if (samples[t].size() != dim) throw Error(ErrorCode::DimensionMismatch, "ragged sample record");
    X.col(t) = samples[t];
  }
  SignalStats s;
  s.mean = X.rowwise().mean();
  X.colwise() -= s.mean;

  s.autocov.resize(static_cast<std::size_t>(opt.tau_max) + 1);
  for (int tau = 0; tau <= opt.tau_max; ++tau) {
    s.autocov[tau] = X.leftCols(T - tau) * X.rightCols(T - tau).transpose() / static_cast<double>(T);
  }

  const Eigen::Index L = std::min<Eigen::Index>(opt.segment_length, T);
  Vector window(L);
  for (Eigen::Index t = 0; t < L; ++t) {
    window(t) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(L));
  }
  const int hop = std::max<int>(1, static_cast<int>(L / 2));
  s.omegas = uniform_psd_grid(opt.grid_points);
  // The kernel returns X X^H, which estimates sum_tau R(tau) e^{+j w tau}; the
  // transpose gives the convention documented in the header.
  s.psd = kernels::welch_cross_spectra(X, window, hop, s.omegas);
  for (CMatrix& P : s.psd) P = P.transpose().eval();
  return s;
}

std::vector<Matrix> autocov_from_psd(const std::vector<double>& omegas,
                                     const std::vector<CMatrix>& psd, int tau_max) {
  std::vector<Matrix> R(static_cast<std::size_t>(tau_max) + 1);
  if (psd.empty()) return R;
  const auto dim = psd.front().rows();
  for (int tau = 0; tau <= tau_max; ++tau) {
    Matrix acc = Matrix::Zero(dim, dim);
    for (std::size_t k = 0; k + 1 < omegas.size(); ++k) {
      const double h = omegas[k + 1] - omegas[k];
      const Matrix a = (psd[k] * std::polar(1.0, omegas[k] * tau)).real();
      const Matrix b = (psd[k + 1] * std::polar(1.0, omegas[k + 1] * tau)).real();
      acc += 0.5 * h * (a + b);
    }
    R[tau] = acc / std::numbers::pi;
  }
  return R;
}

SignalStats push_through_inner(const SignalStats& stats_d, const StateSpaceModel& P_inner) {
  return congruence(stats_d, P_inner, true);
}

SignalStats recover_d_stats(const SignalStats& stats_f, const StateSpaceModel& P_inner) {
  return congruence(stats_f, P_inner, false);
}

CMatrix ar_spectrum(const std::vector<Matrix>& coeffs, const Matrix& innovation_cov, double omega) {
  const auto m = innovation_cov.rows();
  CMatrix Az = CMatrix::Identity(m, m);
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    Az -= coeffs[k].cast<Complex>() * std::polar(1.0, -omega * static_cast<double>(k + 1));
  }
  const CMatrix H = Az.partialPivLu().inverse();
  return H * innovation_cov.cast<Complex>() * H.adjoint();
}

void require_same_grid(const SignalStats& a, const SignalStats& b) {
  if (a.omegas.size() != b.omegas.size()) {
    throw Error(ErrorCode::GridMismatch, "frequency grids have " + std::to_string(a.omegas.size()) +
                                             " and " + std::to_string(b.omegas.size()) + " points");
  }
  for (std::size_t k = 0; k < a.omegas.size(); ++k) {
    if (std::abs(a.omegas[k] - b.omegas[k]) > 1e-12) {
      throw Error(ErrorCode::GridMismatch, "frequency grids differ at index " + std::to_string(k));
    }
  }
}

}  // namespace ioest
