#include "ioest/statespace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ioest/kernels.hpp"
#include "ioest/matrixeq.hpp"

namespace ioest {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NearPole: return "NearPole";
    case ErrorCode::PoleAtMinusOne: return "PoleAtMinusOne";
    case ErrorCode::PoleAtOmega0: return "PoleAtOmega0";
    case ErrorCode::SingularGramian: return "SingularGramian";
    case ErrorCode::RankAmbiguous: return "RankAmbiguous";
    case ErrorCode::NotSquareInvertible: return "NotSquareInvertible";
    case ErrorCode::UnstableA: return "UnstableA";
    case ErrorCode::NotDetectable: return "NotDetectable";
    case ErrorCode::NotStabilizable: return "NotStabilizable";
    case ErrorCode::IterationDiverged: return "IterationDiverged";
    case ErrorCode::SingularFeedthrough: return "SingularFeedthrough";
    case ErrorCode::RiccatiFailure: return "RiccatiFailure";
    case ErrorCode::NotRegular: return "NotRegular";
    case ErrorCode::NotStable: return "NotStable";
    case ErrorCode::NotMinimal: return "NotMinimal";
    case ErrorCode::RankDecisionAmbiguous: return "RankDecisionAmbiguous";
    case ErrorCode::IdentityViolation: return "IdentityViolation";
    case ErrorCode::VerificationFailed: return "VerificationFailed";
    case ErrorCode::RankCGDeficient: return "RankCGDeficient";
    case ErrorCode::AssumptionHNotZero: return "AssumptionHNotZero";
    case ErrorCode::InnovationGramSingular: return "InnovationGramSingular";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::CurveTooFlat: return "CurveTooFlat";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

RankInfo numerical_rank(const Matrix& M, double tol, double scale) {
  RankInfo info;
  if (M.size() == 0) {
    info.gap_ratio = std::numeric_limits<double>::infinity();
    return info;
  }
  Eigen::JacobiSVD<Matrix> svd(M);
  const Vector& s = svd.singularValues();
  info.sigma_max = s(0);
  const double ref = std::max(s(0), scale);
  const double cut = tol * ref;
  while (info.rank < s.size() && s(info.rank) > cut) ++info.rank;
  if (info.rank == s.size()) {
    info.gap_ratio = std::numeric_limits<double>::infinity();
  } else {
    const double kept = info.rank > 0 ? s(info.rank - 1) : ref;
    const double dropped = s(info.rank);
    info.gap_ratio = dropped > 0.0 ? kept / dropped : std::numeric_limits<double>::infinity();
  }
  return info;
}

std::vector<Complex> eigenvalues(const Matrix& A) {
  if (A.rows() == 0) return {};
  Eigen::EigenSolver<Matrix> es(A, false);
  const CVector ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

double spectral_radius(const Matrix& A) {
  double r = 0.0;
  for (const auto& l : eigenvalues(A)) r = std::max(r, std::abs(l));
  return r;
}

double spectral_abscissa(const Matrix& A) {
  double r = -std::numeric_limits<double>::infinity();
  for (const auto& l : eigenvalues(A)) r = std::max(r, l.real());
  return r;
}

// --------------------------------------------------------------------------

StateSpaceModel::StateSpaceModel(Matrix A_, Matrix G_, Matrix C_, Matrix H_, Domain domain_,
                                 Matrix Q_proc_, Matrix R_meas_)
    : A(std::move(A_)),
      G(std::move(G_)),
      C(std::move(C_)),
      H(std::move(H_)),
      domain(domain_),
      Q_proc(std::move(Q_proc_)),
      R_meas(std::move(R_meas_)) {
  if (Q_proc.size() == 0) Q_proc = Matrix::Zero(A.rows(), A.rows());
  if (R_meas.size() == 0) R_meas = Matrix::Identity(C.rows(), C.rows());
}

void StateSpaceModel::validate(double tol) const {
  const auto n_ = A.rows();
  if (A.cols() != n_) throw Error(ErrorCode::DimensionMismatch, "A must be square");
  if (G.rows() != n_) throw Error(ErrorCode::DimensionMismatch, "G must have n rows");
  if (C.cols() != n_) throw Error(ErrorCode::DimensionMismatch, "C must have n columns");
  if (H.rows() != C.rows() || H.cols() != G.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "H must be p x m");
  }
  if (Q_proc.rows() != n_ || Q_proc.cols() != n_) {
    throw Error(ErrorCode::DimensionMismatch, "Q must be n x n");
  }
  if (R_meas.rows() != C.rows() || R_meas.cols() != C.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "R must be p x p");
  }
  const auto check_sym = [&](const Matrix& M, const char* name) {
    if ((M - M.transpose()).norm() > tol * (1.0 + M.norm())) {
      throw Error(ErrorCode::InvalidArgument, std::string(name) + " is not symmetric");
    }
  };
  check_sym(Q_proc, "Q");
  check_sym(R_meas, "R");
  if (n_ > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym(Q_proc), Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < -tol * (1.0 + Q_proc.norm())) {
      throw Error(ErrorCode::InvalidArgument, "Q is not positive semidefinite");
    }
  }
  if (R_meas.rows() > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym(R_meas), Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) <= tol * R_meas.norm()) {
      throw Error(ErrorCode::InvalidArgument, "R is not positive definite");
    }
  }
}

bool StateSpaceModel::is_stable() const {
  if (A.rows() == 0) return true;
  return domain == Domain::DiscreteZ ? spectral_radius(A) < 1.0 : spectral_abscissa(A) < 0.0;
}

StateSpaceModel StateSpaceModel::transposed() const {
  StateSpaceModel t;
  t.A = A.transpose();
  t.G = C.transpose();
  t.C = G.transpose();
  t.H = H.transpose();
  t.domain = domain;
  t.Q_proc = Matrix::Zero(A.rows(), A.rows());
  t.R_meas = Matrix::Identity(t.C.rows(), t.C.rows());
  return t;
}

std::vector<double> poly_from_roots(std::span<const Complex> roots) {
  std::vector<Complex> c{1.0};
  for (const auto& r : roots) {
    std::vector<Complex> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= r * c[i];
    }
    c = std::move(next);
  }
  std::vector<double> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (std::abs(c[i].imag()) > 1e-9 * (1.0 + std::abs(c[i]))) {
      throw Error(ErrorCode::InvalidArgument, "complex roots must come in conjugate pairs");
    }
    out[i] = c[i].real();
  }
  return out;
}

StateSpaceModel from_transfer_function(std::span<const double> num, std::span<const double> den,
                                       Domain domain) {
  if (den.empty() || den[0] == 0.0) {
    throw Error(ErrorCode::InvalidArgument, "denominator must have a nonzero leading coefficient");
  }
  if (num.size() > den.size()) throw Error(ErrorCode::InvalidArgument, "improper transfer function");
  const int n = static_cast<int>(den.size()) - 1;
  std::vector<double> a(den.begin(), den.end());
  std::vector<double> b(den.size(), 0.0);
  std::copy(num.begin(), num.end(), b.begin() + static_cast<long>(den.size() - num.size()));
  const double lead = a[0];
  for (auto& v : a) v /= lead;
  for (auto& v : b) v /= lead;

  // b(x)/a(x) = b0 + (b(x) - b0 a(x)) / a(x)
  Matrix A = Matrix::Zero(n, n);
  Matrix G = Matrix::Zero(n, 1);
  Matrix C = Matrix::Zero(1, n);
  Matrix H = Matrix::Constant(1, 1, b[0]);
  if (n > 0) {
    for (int j = 0; j < n; ++j) A(0, j) = -a[j + 1];
    for (int i = 1; i < n; ++i) A(i, i - 1) = 1.0;
    G(0, 0) = 1.0;
    for (int j = 0; j < n; ++j) C(0, j) = b[j + 1] - b[0] * a[j + 1];
  }
  return StateSpaceModel(A, G, C, H, domain);
}

StateSpaceModel series(const StateSpaceModel& first, const StateSpaceModel& second) {
  if (second.m() != first.p()) {
    throw Error(ErrorCode::DimensionMismatch, "series: output of first must feed second");
  }
  const int n1 = first.n();
  const int n2 = second.n();
  Matrix A = Matrix::Zero(n1 + n2, n1 + n2);
  A.topLeftCorner(n1, n1) = first.A;
  A.bottomLeftCorner(n2, n1) = second.G * first.C;
  A.bottomRightCorner(n2, n2) = second.A;
  Matrix G(n1 + n2, first.m());
  G << first.G, second.G * first.H;
  Matrix C(second.p(), n1 + n2);
  C << second.H * first.C, second.C;
  Matrix H = second.H * first.H;
  return StateSpaceModel(A, G, C, H, first.domain);
}

// --------------------------------------------------------------------------

FrequencyGrid FrequencyGrid::unit_circle(int count) {
  FrequencyGrid g;
  g.domain = Domain::DiscreteZ;
  g.points.reserve(count);
  for (int k = 0; k < count; ++k) {
    g.points.push_back(std::polar(1.0, 2.0 * std::numbers::pi * k / count));
  }
  return g;
}

namespace {

std::vector<double> log_angles(int count) {
  std::vector<double> theta(count);
  for (int k = 0; k < count; ++k) {
    const double frac = count > 1 ? static_cast<double>(k) / (count - 1) : 1.0;
    theta[k] = std::numbers::pi * std::pow(10.0, -4.0 * (1.0 - frac));
  }
  return theta;
}

}  // namespace

FrequencyGrid FrequencyGrid::unit_circle_log(int count) {
  FrequencyGrid g;
  g.domain = Domain::DiscreteZ;
  for (double th : log_angles(count)) g.points.push_back(std::polar(1.0, th));
  return g;
}

FrequencyGrid FrequencyGrid::imaginary_axis_log(int count, double omega0) {
  FrequencyGrid g;
  g.domain = Domain::ContinuousS;
  for (double th : log_angles(count)) {
    // theta = pi maps to s = infinity; pull it back slightly.
    const double t = std::min(th, std::numbers::pi * (1.0 - 1e-6));
    g.points.emplace_back(0.0, omega0 * std::tan(0.5 * t));
  }
  return g;
}

FrequencyGrid FrequencyGrid::verification(Domain domain, int count) {
  return domain == Domain::DiscreteZ ? unit_circle_log(count) : imaginary_axis_log(count);
}

CMatrix eval_freq(const StateSpaceModel& sys, Complex z, double tol) {
  const int n = sys.n();
  CMatrix out = sys.H.cast<Complex>();
  if (n == 0) return out;
  CMatrix M = z * CMatrix::Identity(n, n) - sys.A.cast<Complex>();
  Eigen::JacobiSVD<CMatrix> svd(M);
  const double smin = svd.singularValues()(n - 1);
  if (smin < tol * (1.0 + sys.A.norm())) {
    throw Error(ErrorCode::NearPole, "frequency-response evaluation at or near a pole");
  }
  out.noalias() += sys.C.cast<Complex>() * M.partialPivLu().solve(sys.G.cast<Complex>());
  return out;
}

CMatrix eval_paraconjugate(const StateSpaceModel& sys, Complex z, double tol) {
  const Complex mirror = sys.is_discrete() ? 1.0 / std::conj(z) : -std::conj(z);
  return eval_freq(sys, mirror, tol).adjoint();
}

// --------------------------------------------------------------------------

StateSpaceModel tustin_to_continuous(const StateSpaceModel& sys, double omega0) {
  if (!sys.is_discrete()) throw Error(ErrorCode::InvalidArgument, "expected a discrete model");
  if (!(omega0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "omega0 must be positive");
  const int n = sys.n();
  StateSpaceModel out = sys;
  out.domain = Domain::ContinuousS;
  if (n == 0) return out;
  const Matrix I = Matrix::Identity(n, n);
  const Matrix IpA = I + sys.A;
  Eigen::JacobiSVD<Matrix> svd(IpA);
  if (svd.singularValues()(n - 1) < 1e-12 * (1.0 + sys.A.norm())) {
    throw Error(ErrorCode::PoleAtMinusOne, "I + A is singular (pole at z = -1)");
  }
  const auto lu = IpA.partialPivLu();
  const Matrix inv = lu.inverse();
  const double k = std::sqrt(2.0 * omega0);
  out.A = omega0 * (sys.A - I) * inv;
  out.G = k * lu.solve(sys.G);
  out.C = k * sys.C * inv;
  out.H = sys.H - sys.C * lu.solve(sys.G);
  return out;
}

StateSpaceModel tustin_to_discrete(const StateSpaceModel& sys, double omega0) {
  if (sys.is_discrete()) throw Error(ErrorCode::InvalidArgument, "expected a continuous model");
  if (!(omega0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "omega0 must be positive");
  const int n = sys.n();
  StateSpaceModel out = sys;
  out.domain = Domain::DiscreteZ;
  if (n == 0) return out;
  const Matrix I = Matrix::Identity(n, n);
  const Matrix N = omega0 * I - sys.A;
  Eigen::JacobiSVD<Matrix> svd(N);
  if (svd.singularValues()(n - 1) < 1e-12 * (1.0 + sys.A.norm())) {
    throw Error(ErrorCode::PoleAtOmega0, "omega0 I - A is singular");
  }
  const auto lu = N.partialPivLu();
  const Matrix inv = lu.inverse();
  const double k = std::sqrt(2.0 * omega0);
  out.A = inv * (omega0 * I + sys.A);
  out.G = k * lu.solve(sys.G);
  out.C = k * sys.C * inv;
  out.H = sys.H + sys.C * lu.solve(sys.G);
  return out;
}

// --------------------------------------------------------------------------

GramianReport observability_gramian_finite(const Matrix& A, const Matrix& C, int N) {
  if (N < 1) throw Error(ErrorCode::InvalidArgument, "horizon N must be >= 1");
  const auto n = A.rows();
  GramianReport rep;
  rep.horizon = N;
  rep.W_o = Matrix::Zero(n, n);
  Matrix CAj = C;
  for (int j = 0; j < N; ++j) {
    rep.W_o.noalias() += CAj.transpose() * CAj;
    CAj = CAj * A;
  }
  rep.W_o = sym(rep.W_o);
  if (n == 0) {
    rep.invertible = true;
    return rep;
  }
  rep.rank = numerical_rank(rep.W_o).rank;
  Eigen::SelfAdjointEigenSolver<Matrix> es(rep.W_o, Eigen::EigenvaluesOnly);
  rep.min_eig = es.eigenvalues()(0);
  rep.invertible = N >= n && rep.rank == n;
  return rep;
}

Vector reconstruct_state(const StateSpaceModel& sys, std::span<const Vector> corrected_outputs,
                         int N) {
  if (static_cast<int>(corrected_outputs.size()) < N) {
    throw Error(ErrorCode::InvalidArgument, "need N corrected outputs");
  }
  const GramianReport gram = observability_gramian_finite(sys.A, sys.C, N);
  if (!gram.invertible) {
    throw Error(ErrorCode::SingularGramian,
                "observability Gramian has rank " + std::to_string(gram.rank) + " < n = " +
                    std::to_string(sys.n()));
  }
  const auto first = corrected_outputs.size() - static_cast<std::size_t>(N);
  Vector rhs = Vector::Zero(sys.n());
  Matrix CAk = sys.C;
  for (int k = 0; k < N; ++k) {
    const Vector& y = corrected_outputs[first + static_cast<std::size_t>(k)];
    if (y.size() != sys.p()) throw Error(ErrorCode::DimensionMismatch, "output has wrong size");
    rhs.noalias() += CAk.transpose() * y;
    CAk = CAk * sys.A;
  }
  return gram.W_o.ldlt().solve(rhs);
}

MinimalityReport reachability_observability_check(const StateSpaceModel& sys, double tol) {
  const int n = sys.n();
  MinimalityReport rep;
  rep.n = n;
  if (n == 0) {
    rep.minimal = true;
    return rep;
  }
  // PBH tests at every eigenvalue; Krylov matrices are too ill-conditioned for
  // a relative rank decision once n grows.
  const CMatrix A = sys.A.cast<Complex>();
  const double scale_r = std::max({1.0, sys.A.norm(), sys.G.norm()});
  const double scale_o = std::max({1.0, sys.A.norm(), sys.C.norm()});
  const auto deficiency = [&](const CMatrix& M, double scale) {
    Eigen::JacobiSVD<CMatrix> svd(M);
    const auto& sv = svd.singularValues();
    int d = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) d += sv(i) <= tol * scale ? 1 : 0;
    return d + static_cast<int>(n - std::min<Eigen::Index>(n, sv.size()));
  };
  int worst_r = 0, worst_o = 0;
  for (Complex lambda : eigenvalues(sys.A)) {
    const CMatrix shifted = lambda * CMatrix::Identity(n, n) - A;
    CMatrix R(n, n + sys.m());
    R << shifted, sys.G.cast<Complex>();
    CMatrix O(n + sys.p(), n);
    O << shifted, sys.C.cast<Complex>();
    worst_r = std::max(worst_r, deficiency(R, scale_r));
    worst_o = std::max(worst_o, deficiency(O, scale_o));
  }
  rep.reachability_rank = n - worst_r;
  rep.observability_rank = n - worst_o;
  rep.minimal = rep.reachability_rank == n && rep.observability_rank == n;
  return rep;
}

std::vector<Matrix> markov_parameters(const StateSpaceModel& sys, int count) {
  std::vector<Matrix> h;
  h.reserve(count);
  if (count > 0) h.push_back(sys.H);
  Matrix AkG = sys.G;
  for (int k = 1; k < count; ++k) {
    h.push_back(sys.C * AkG);
    AkG = sys.A * AkG;
  }
  return h;
}

DegreeEstimate hankel_degree(const std::vector<Matrix>& markov, int blocks, double tol,
                             double scale) {
  if (blocks < 1) return {0, std::numeric_limits<double>::infinity()};
  if (static_cast<int>(markov.size()) < 2 * blocks) {
    throw Error(ErrorCode::InvalidArgument, "not enough Markov parameters for the Hankel matrix");
  }
  const auto rows = markov[1].rows();
  const auto cols = markov[1].cols();
  Matrix hankel(rows * blocks, cols * blocks);
  for (int i = 0; i < blocks; ++i) {
    for (int j = 0; j < blocks; ++j) hankel.block(i * rows, j * cols, rows, cols) = markov[i + j + 1];
  }
  const RankInfo info = numerical_rank(hankel, tol, scale);
  return {info.rank, info.gap_ratio};
}

RegularityReport regularity_check(const StateSpaceModel& sys_in, double tol) {
  if (!sys_in.is_stable()) throw Error(ErrorCode::NotStable, "regularity check needs a stable plant");
  const StateSpaceModel sys = sys_in.is_discrete() ? sys_in : tustin_to_discrete(sys_in, 1.0);
  const int n = sys.n();
  RegularityReport rep;
  if (n == 0) {
    rep.regular = true;
    rep.gap_ratio_P = rep.gap_ratio_PPsim = std::numeric_limits<double>::infinity();
    return rep;
  }
  const int blocks = 2 * n;

  const auto h = markov_parameters(sys, 2 * blocks);
  const auto degP = hankel_degree(h, blocks, tol, 0.0);

  // Two-sided expansion of P P~ = sum_k R_k z^{-k}. For k >= 1,
  //   R_k = C A^{k-1} (G H^T + A W C^T),  W = A W A^T + G G^T,
  // and R_{-k} = R_k^T, so delta(P P~) is twice the degree of the causal part.
  const Matrix W = solve_lyapunov_discrete(sys.A, sys.G * sys.G.transpose()).X;
  const StateSpaceModel causal(sys.A, sys.G * sys.H.transpose() + sys.A * W * sys.C.transpose(),
                               sys.C, Matrix::Zero(sys.p(), sys.p()));
  const Matrix R0 = sys.H * sys.H.transpose() + sys.C * W * sys.C.transpose();
  const auto r = markov_parameters(causal, 2 * blocks);
  const auto degPP = hankel_degree(r, blocks, tol, R0.norm());

  rep.macmillan_deg_P = degP.degree;
  rep.macmillan_deg_PPsim = 2 * degPP.degree;
  rep.gap_ratio_P = degP.gap_ratio;
  rep.gap_ratio_PPsim = degPP.gap_ratio;
  rep.regular = rep.macmillan_deg_PPsim == 2 * rep.macmillan_deg_P;
  if (degP.gap_ratio < kGapRatio || degPP.gap_ratio < kGapRatio) {
    throw Error(ErrorCode::RankAmbiguous,
                "singular-value gap at the degree cut is below " + std::to_string(kGapRatio));
  }
  return rep;
}

std::vector<Complex> transmission_zeros_square(const StateSpaceModel& sys, double tol) {
  if (sys.p() != sys.m()) {
    throw Error(ErrorCode::NotSquareInvertible, "transmission zeros need a square plant");
  }
  const int n = sys.n();
  const int m = sys.m();
  const double scale = 1.0 + sys.C.norm() * sys.G.norm();
  if (m > 0 && numerical_rank(sys.H, tol).rank == m && sys.H.norm() > tol * scale) {
    return eigenvalues(sys.A - sys.G * sys.H.partialPivLu().solve(sys.C));
  }
  if (sys.H.norm() <= tol * scale) {
    const Matrix CG = sys.C * sys.G;
    if (m > 0 && numerical_rank(CG, tol).rank == m) {
      // Inverse system: x+ = (I - G (CG)^{-1} C) A x + ...; its state matrix maps
      // into ker C, and the restriction to ker C carries the finite zeros.
      const Matrix N = (Matrix::Identity(n, n) - sys.G * CG.partialPivLu().solve(sys.C)) * sys.A;
      Eigen::JacobiSVD<Matrix> svd(sys.C, Eigen::ComputeFullV);
      const Matrix Z = svd.matrixV().rightCols(n - m);
      return eigenvalues(Z.transpose() * N * Z);
    }
  }
  throw Error(ErrorCode::NotSquareInvertible,
              "neither H nor CG is invertible; scan sigma_min instead");
}

double min_singular_value(const StateSpaceModel& sys, std::span<const Complex> points) {
  return kernels::min_over(points.size(), [&](std::size_t k) {
    const CMatrix P = eval_freq(sys, points[k]);
    Eigen::JacobiSVD<CMatrix> svd(P);
    const auto& s = svd.singularValues();
    return s.size() > 0 ? s(s.size() - 1) : 0.0;
  });
}

}  // namespace ioest
