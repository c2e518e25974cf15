#include "ioest/matrixeq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <unsupported/Eigen/KroneckerProduct>

namespace ioest {
namespace {

Matrix unvec(const Vector& v, Eigen::Index n) { return Eigen::Map<const Matrix>(v.data(), n, n); }

bool pbh_full_rank(const Matrix& A, const Matrix& M, bool stack_rows, double unstable_from) {
  const auto n = A.rows();
  const double scale = 1.0 + A.norm() + M.norm();
  for (const auto& lambda : eigenvalues(A)) {
    if (std::abs(lambda) < unstable_from) continue;
    const CMatrix shifted = lambda * CMatrix::Identity(n, n) - A.cast<Complex>();
    CMatrix pencil;
    if (stack_rows) {
      pencil.resize(n + M.rows(), n);
      pencil << shifted, M.cast<Complex>();
    } else {
      pencil.resize(n, n + M.cols());
      pencil << shifted, M.cast<Complex>();
    }
    Eigen::JacobiSVD<CMatrix> svd(pencil);
    if (svd.singularValues()(n - 1) <= 1e-10 * scale) return false;
  }
  return true;
}

Matrix dare_rhs(const Matrix& A, const Matrix& C, const Matrix& Q, const Matrix& R,
                const Matrix& S) {
  const Matrix ASCt = A * S * C.transpose();
  const Matrix Sy = C * S * C.transpose() + R;
  return A * S * A.transpose() - ASCt * Sy.ldlt().solve(ASCt.transpose()) + Q;
}

Matrix care_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& X) {
  return A.transpose() * X + X * A - X * B * R.ldlt().solve(B.transpose() * X) + Q;
}

}  // namespace

LyapunovSolution solve_lyapunov_continuous(const Matrix& A, const Matrix& W) {
  const auto n = A.rows();
  if (A.cols() != n || W.rows() != n || W.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "Lyapunov: A and W must be n x n");
  }
  LyapunovSolution sol;
  if (n == 0) {
    sol.X = Matrix(0, 0);
    return sol;
  }
  if (spectral_abscissa(A) >= 0.0) throw Error(ErrorCode::UnstableA, "A is not Hurwitz");
  const Matrix I = Matrix::Identity(n, n);
  const Matrix K = Eigen::kroneckerProduct(I, A) + Eigen::kroneckerProduct(A, I);
  const Vector w = -Eigen::Map<const Vector>(W.data(), n * n);
  sol.X = sym(unvec(K.partialPivLu().solve(w), n));
  sol.residual_norm = (A * sol.X + sol.X * A.transpose() + W).norm();
  return sol;
}

LyapunovSolution solve_lyapunov_discrete(const Matrix& A, const Matrix& W) {
  const auto n = A.rows();
  if (A.cols() != n || W.rows() != n || W.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "Lyapunov: A and W must be n x n");
  }
  LyapunovSolution sol;
  if (n == 0) {
    sol.X = Matrix(0, 0);
    return sol;
  }
  if (spectral_radius(A) >= 1.0) throw Error(ErrorCode::UnstableA, "A is not Schur stable");
  const Matrix K = Eigen::kroneckerProduct(A, A) - Matrix::Identity(n * n, n * n);
  const Vector w = -Eigen::Map<const Vector>(W.data(), n * n);
  sol.X = sym(unvec(K.partialPivLu().solve(w), n));
  sol.residual_norm = (A * sol.X * A.transpose() - sol.X + W).norm();
  return sol;
}

// --------------------------------------------------------------------------

RiccatiSolution solve_dare(const Matrix& A, const Matrix& C, const Matrix& Q, const Matrix& R) {
  const auto n = A.rows();
  const auto p = C.rows();
  if (A.cols() != n || C.cols() != n || Q.rows() != n || Q.cols() != n || R.rows() != p ||
      R.cols() != p) {
    throw Error(ErrorCode::DimensionMismatch, "DARE: inconsistent dimensions");
  }
  RiccatiSolution sol;
  if (n == 0) {
    sol.X = Matrix(0, 0);
    sol.gain = Matrix(0, p);
    sol.method = "trivial";
    return sol;
  }
  if (!pbh_full_rank(A, C, true, 1.0 - 1e-10)) {
    throw Error(ErrorCode::NotDetectable, "(A, C) is not detectable");
  }
  if (!pbh_full_rank(A, psd_sqrt(Q), false, 1.0 - 1e-10)) {
    throw Error(ErrorCode::NotStabilizable, "(A, Q^(1/2)) is not stabilizable");
  }

  // The equation is homogeneous of degree one in (S, Q, R).
  const double s = Q.norm() > 0.0 ? Q.norm() : 1.0;
  const Matrix Qs = Q / s;
  const Matrix Rs = R / s;
  const Matrix I = Matrix::Identity(n, n);

  // Doubling on the dual control-form problem.
  Matrix Ak = A.transpose();
  Matrix Gk = C.transpose() * Rs.ldlt().solve(C);
  Matrix Hk = Qs;
  bool converged = false;
  int it = 0;
  for (; it < 100; ++it) {
    const auto W = (I + Gk * Hk).partialPivLu();
    const Matrix WA = W.solve(Ak);
    const Matrix Anext = Ak * WA;
    const Matrix Gnext = Gk + Ak * W.solve(Gk) * Ak.transpose();
    const Matrix Hnext = Hk + Ak.transpose() * Hk * WA;
    if (!Hnext.allFinite()) break;
    const double change = (Hnext - Hk).norm();
    Ak = Anext;
    Gk = sym(Gnext);
    Hk = sym(Hnext);
    if (change <= 1e-14 * (1.0 + Hk.norm())) {
      converged = true;
      break;
    }
  }

  Matrix S;
  if (converged) {
    S = Hk;
    sol.method = "doubling";
    sol.iterations = it + 1;
  } else {
    S = Qs;
    int k = 0;
    for (; k < 200000; ++k) {
      const Matrix next = sym(dare_rhs(A, C, Qs, Rs, S));
      const double change = (next - S).norm();
      S = next;
      if (!S.allFinite()) break;
      if (change <= 1e-14 * (1.0 + S.norm())) break;
    }
    if (!S.allFinite()) throw Error(ErrorCode::IterationDiverged, "DARE iteration diverged");
    sol.method = "fixed-point";
    sol.iterations = k + 1;
  }

  sol.scaling = s;
  sol.X = sym(s * S);
  const Matrix ASCt = A * sol.X * C.transpose();
  const Matrix Sy = C * sol.X * C.transpose() + R;
  sol.gain = Sy.transpose().ldlt().solve(ASCt.transpose()).transpose();
  sol.residual_norm = (dare_rhs(A, C, Q, R, sol.X) - sol.X).norm();
  sol.closed_loop = spectral_radius(A - sol.gain * C);
  if (sol.closed_loop >= 1.0) {
    throw Error(ErrorCode::IterationDiverged, "DARE solution is not stabilizing");
  }
  return sol;
}

RiccatiSolution solve_care(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  const auto n = A.rows();
  const auto m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != m ||
      R.cols() != m) {
    throw Error(ErrorCode::DimensionMismatch, "CARE: inconsistent dimensions");
  }
  RiccatiSolution sol;
  if (n == 0) {
    sol.X = Matrix(0, 0);
    sol.gain = Matrix(m, 0);
    sol.method = "trivial";
    return sol;
  }
  const auto Rldlt = R.ldlt();
  if (Rldlt.info() != Eigen::Success || !Rldlt.isPositive()) {
    throw Error(ErrorCode::InvalidArgument, "CARE: R must be positive definite");
  }
  const Matrix BRB = B * Rldlt.solve(B.transpose());

  Matrix Ham(2 * n, 2 * n);
  Ham << A, -BRB, -Q, -A.transpose();
  Matrix Z;
  try {
    Z = matrix_sign(Ham);
  } catch (const Error&) {
    throw Error(ErrorCode::RiccatiFailure, "Hamiltonian has eigenvalues on the imaginary axis");
  }
  // Stable invariant subspace: range of (I - sign); solve [Z12; Z22 + I] X = -[Z11 + I; Z21].
  const Matrix I = Matrix::Identity(n, n);
  Matrix lhs(2 * n, n);
  lhs << Z.topRightCorner(n, n), Z.bottomRightCorner(n, n) + I;
  Matrix rhs(2 * n, n);
  rhs << Z.topLeftCorner(n, n) + I, Z.bottomLeftCorner(n, n);
  Matrix X = sym(lhs.colPivHouseholderQr().solve(-rhs));
  sol.method = "matrix-sign";

  // Newton-Kleinman polishing.
  double res = care_residual(A, B, Q, R, X).norm();
  for (int k = 0; k < 20; ++k) {
    const Matrix K = Rldlt.solve(B.transpose() * X);
    const Matrix Acl = A - B * K;
    if (spectral_abscissa(Acl) >= 0.0) break;
    const Matrix next =
        solve_lyapunov_continuous(Acl.transpose(), Q + K.transpose() * R * K).X;
    const double next_res = care_residual(A, B, Q, R, next).norm();
    if (!(next_res < res)) break;
    X = next;
    res = next_res;
    sol.method = "matrix-sign+newton";
    ++sol.iterations;
    if (res <= 1e-15 * (1.0 + X.norm())) break;
  }

  sol.X = X;
  sol.gain = Rldlt.solve(B.transpose() * X);
  sol.residual_norm = res;
  sol.closed_loop = spectral_abscissa(A - B * sol.gain);
  if (sol.closed_loop >= 0.0) throw Error(ErrorCode::RiccatiFailure, "CARE solution not stabilizing");
  return sol;
}

// --------------------------------------------------------------------------

SymEig symeig(const Matrix& S_in) {
  const auto n = S_in.rows();
  Matrix S = sym(S_in);
  Matrix E = Matrix::Identity(n, n);  // columns are eigenvectors
  SymEig out;
  const double total = S.norm();
  for (int sweep = 0; sweep < 30; ++sweep) {
    double off = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) off += S(i, j) * S(i, j);
      }
    }
    if (std::sqrt(off) <= 1e-13 * total || total == 0.0) break;
    ++out.sweeps;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (S(p, q) == 0.0) continue;
        const double theta = (S(q, q) - S(p, p)) / (2.0 * S(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double skp = S(k, p);
          const double skq = S(k, q);
          S(k, p) = c * skp - s * skq;
          S(k, q) = s * skp + c * skq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double spk = S(p, k);
          const double sqk = S(q, k);
          S(p, k) = c * spk - s * sqk;
          S(q, k) = s * spk + c * sqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double ekp = E(k, p);
          const double ekq = E(k, q);
          E(k, p) = c * ekp - s * ekq;
          E(k, q) = s * ekp + c * ekq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return S(a, a) < S(b, b); });
  out.values.resize(n);
  out.V.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = S(src, src);
    Vector v = E.col(src);
    // Sign convention: largest-magnitude entry positive.
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0.0) v = -v;
    out.V.row(k) = v.transpose();
  }
  return out;
}

Matrix psd_sqrt(const Matrix& S) {
  if (S.rows() == 0) return Matrix(0, 0);
  const SymEig e = symeig(S);
  const Vector root = e.values.cwiseMax(0.0).cwiseSqrt();
  return sym(e.V.transpose() * root.asDiagonal() * e.V);
}

Matrix matrix_sign(const Matrix& M, int max_iter) {
  const auto n = M.rows();
  if (n == 0) return M;
  Matrix Z = M;
  bool scaling = true;
  for (int k = 0; k < max_iter; ++k) {
    const auto lu = Z.partialPivLu();
    if (!(std::abs(lu.determinant()) > 0.0) || lu.rcond() < 1e-14) {
      throw Error(ErrorCode::IterationDiverged, "matrix sign: eigenvalue on the imaginary axis");
    }
    const Matrix Zinv = lu.inverse();
    double c = 1.0;
    if (scaling) {
      // Determinant scaling, computed through the log to avoid overflow.
      double logdet = 0.0;
      const Matrix& LU = lu.matrixLU();
      for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(std::abs(LU(i, i)));
      c = std::exp(-logdet / static_cast<double>(n));
    }
    const Matrix next = 0.5 * (c * Z + Zinv / c);
    const double change = (next - Z).norm();
    Z = next;
    if (!Z.allFinite()) {
      throw Error(ErrorCode::IterationDiverged, "matrix sign iteration overflowed");
    }
    if (change <= 1e-2 * Z.norm()) scaling = false;
    if (change <= 1e-13 * Z.norm()) return Z;
  }
  throw Error(ErrorCode::IterationDiverged, "matrix sign iteration did not converge");
}

// --------------------------------------------------------------------------
// Spectral factorization. Everything below works in the control orientation
// (P~ P = Po~ Po, Po = J + H (sI - A)^{-1} B); the estimation orientation is
// the transpose.

namespace {

struct ControlFactor {
  Matrix J;
  Matrix H;
  Matrix Y;
  FactorRoute route;
};

// Y for  Y Az + Az^T Y - Y M Y = 0  with Pi B^T Y = 0, from the anti-stable
// invariant subspace of Az^T restricted to ker(Pi B^T).
Matrix riccati_invariant_subspace(const Matrix& Az, const Matrix& M, const Matrix& PiBt) {
  const auto n = Az.rows();
  if (n == 0) return Matrix(0, 0);
  const Matrix sgn = matrix_sign(Az.transpose());
  const Matrix proj = 0.5 * (Matrix::Identity(n, n) + sgn);
  Eigen::JacobiSVD<Matrix> svd(proj, Eigen::ComputeFullU);
  const RankInfo r = numerical_rank(proj, 1e-6);
  if (r.rank == 0) return Matrix::Zero(n, n);
  Matrix V = svd.matrixU().leftCols(r.rank);

  // Unobservable subspace of (Lambda_u, Pi B^T V_u).
  const Matrix Lu = V.transpose() * Az.transpose() * V;
  const Matrix Cu = PiBt * V;
  if (Cu.rows() > 0 && Cu.norm() > 0.0) {
    const int l = r.rank;
    Matrix obs(Cu.rows() * l, l);
    Matrix CL = Cu;
    for (int k = 0; k < l; ++k) {
      obs.middleRows(k * Cu.rows(), Cu.rows()) = CL;
      CL = CL * Lu;
    }
    Eigen::JacobiSVD<Matrix> osvd(obs, Eigen::ComputeFullV);
    const RankInfo orank = numerical_rank(obs, 1e-8, 1.0 + Az.norm());
    if (orank.rank == l) return Matrix::Zero(n, n);
    V = V * osvd.matrixV().rightCols(l - orank.rank);
  }
  const Matrix Lambda = V.transpose() * Az.transpose() * V;
  const Matrix N = sym(V.transpose() * M * V);
  const Matrix W = solve_lyapunov_continuous(-Lambda.transpose(), N).X;
  // W Lambda + Lambda^T W = N  <=>  (-Lambda^T) W + W (-Lambda) + N = 0
  return sym(V * W.ldlt().solve(V.transpose()));
}

// Coefficients (highest power first) of h^T adj(sI - A) B for each unit h,
// via Faddeev-LeVerrier: adj(sI - A) = sum_k s^{n-1-k} N_k, N_0 = I,
// N_k = A N_{k-1} + a_k I.
ControlFactor siso_zero_reflection(const StateSpaceModel& sys) {
  const int n = sys.n();
  const Matrix I = Matrix::Identity(n, n);
  std::vector<double> a(static_cast<std::size_t>(n) + 1, 0.0);
  a[0] = 1.0;
  std::vector<Matrix> Nk;
  Matrix Ncur = I;
  for (int k = 1; k <= n; ++k) {
    Nk.push_back(Ncur);
    const Matrix AN = sys.A * Ncur;
    a[static_cast<std::size_t>(k)] = -AN.trace() / k;
    Ncur = AN + a[static_cast<std::size_t>(k)] * I;
  }
  const double d = sys.H(0, 0);
  Matrix basis(n, n);  // basis(k, i) = (N_k B)_i
  std::vector<double> num(static_cast<std::size_t>(n) + 1);
  num[0] = d;
  for (int k = 0; k < n; ++k) {
    const Vector NB = Nk[static_cast<std::size_t>(k)] * sys.G;
    basis.row(k) = NB.transpose();
    num[static_cast<std::size_t>(k) + 1] = (sys.C * NB)(0, 0) + d * a[static_cast<std::size_t>(k) + 1];
  }

  double peak = 0.0;
  for (double c : num) peak = std::max(peak, std::abs(c));
  if (peak == 0.0) throw Error(ErrorCode::SingularFeedthrough, "plant is identically zero");
  std::size_t lead = 0;
  while (std::abs(num[lead]) <= 1e-12 * peak) ++lead;
  const int deg = static_cast<int>(num.size() - 1 - lead);
  std::vector<Complex> roots;
  if (deg > 0) {
    Matrix comp = Matrix::Zero(deg, deg);
    for (int j = 0; j < deg; ++j) comp(0, j) = -num[lead + 1 + static_cast<std::size_t>(j)] / num[lead];
    for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    roots = eigenvalues(comp);
  }
  for (auto& z : roots) {
    if (z.real() > 0.0) z = -std::conj(z);
  }
  const std::vector<double> monic = poly_from_roots(roots);
  std::vector<double> target(num.size(), 0.0);
  for (std::size_t k = 0; k < monic.size(); ++k) target[lead + k] = num[lead] * monic[k];

  Vector rhs(n);
  for (int k = 0; k < n; ++k) {
    rhs(k) = target[static_cast<std::size_t>(k) + 1] - d * a[static_cast<std::size_t>(k) + 1];
  }
  ControlFactor f;
  f.J = sys.H;
  f.H = basis.partialPivLu().solve(rhs).transpose();
  f.route = FactorRoute::ZeroReflection;
  return f;
}

ControlFactor control_factor(const StateSpaceModel& sys, std::optional<FactorRoute> route) {
  const int n = sys.n();
  const int m = sys.p();  // rows of D: Po is m x p after normalization
  const Matrix& A = sys.A;
  const Matrix& B = sys.G;
  const Matrix& C = sys.C;
  const Matrix& D = sys.H;

  const RankInfo drank = numerical_rank(D);
  const bool full_row = D.rows() > 0 && drank.rank == D.rows();
  const bool siso = sys.p() == 1 && sys.m() == 1;

  FactorRoute chosen;
  if (route) {
    chosen = *route;
  } else if (!full_row && siso) {
    chosen = FactorRoute::ZeroReflection;
  } else {
    chosen = D.rows() == D.cols() ? FactorRoute::Riccati : FactorRoute::InvariantSubspace;
  }
  if (chosen != FactorRoute::ZeroReflection && !full_row) {
    throw Error(ErrorCode::SingularFeedthrough,
                "feedthrough Gram matrix is singular (rank " + std::to_string(drank.rank) + ")");
  }
  if (chosen == FactorRoute::ZeroReflection && !siso) {
    throw Error(ErrorCode::InvalidArgument, "zero reflection needs a scalar plant");
  }

  ControlFactor f;
  if (chosen == FactorRoute::ZeroReflection) {
    f = siso_zero_reflection(sys);
  } else {
    const Matrix DDt = D * D.transpose();
    const Matrix E = D.transpose() * DDt.ldlt().solve(Matrix::Identity(m, m));  // p x m
    const Matrix Az = A - B * E * C;
    Matrix Y;
    if (chosen == FactorRoute::Riccati) {
      if (D.rows() != D.cols()) {
        throw Error(ErrorCode::InvalidArgument, "the Riccati route needs a square plant");
      }
      try {
        Y = solve_care(Az, B, Matrix::Zero(n, n), D.transpose() * D).X;
      } catch (const Error& e) {
        throw Error(ErrorCode::RiccatiFailure, std::string("spectral factor CARE: ") + e.what());
      }
    } else {
      const Matrix Pi = Matrix::Identity(D.cols(), D.cols()) - E * D;
      try {
        Y = riccati_invariant_subspace(Az, B * E * E.transpose() * B.transpose(),
                                       Pi * B.transpose());
      } catch (const Error& e) {
        throw Error(ErrorCode::RiccatiFailure, std::string("spectral factor subspace: ") + e.what());
      }
    }
    f.J = D;
    f.H = C + E.transpose() * B.transpose() * Y;
    f.route = chosen;
  }

  // Normalize J to upper trapezoidal with nonnegative diagonal: J = W^T R.
  if (f.J.rows() > 0) {
    Eigen::HouseholderQR<Matrix> qr(f.J);
    Matrix W = qr.householderQ() * Matrix::Identity(f.J.rows(), f.J.rows());
    Matrix Rq = W.transpose() * f.J;
    for (Eigen::Index i = 0; i < std::min(Rq.rows(), Rq.cols()); ++i) {
      if (Rq(i, i) < 0.0) W.col(i) = -W.col(i);
    }
    f.J = W.transpose() * f.J;
    f.H = W.transpose() * f.H;
  }

  const Matrix Q = solve_lyapunov_continuous(A.transpose(), C.transpose() * C).X;
  const Matrix X = solve_lyapunov_continuous(A.transpose(), f.H.transpose() * f.H).X;
  f.Y = sym(Q - X);
  return f;
}

}  // namespace

SpectralFactor spectral_factor_continuous(const StateSpaceModel& sys,
                                          FactorOrientation orientation,
                                          std::optional<FactorRoute> route) {
  if (sys.is_discrete()) throw Error(ErrorCode::InvalidArgument, "expected a continuous model");
  if (!sys.is_stable()) throw Error(ErrorCode::NotStable, "spectral factor needs a stable plant");

  SpectralFactor out;
  if (orientation == FactorOrientation::Control) {
    ControlFactor f = control_factor(sys, route);
    out.outer = StateSpaceModel(sys.A, sys.G, f.H, f.J, Domain::ContinuousS);
    out.Y = f.Y;
    out.route = f.route;
  } else {
    ControlFactor f = control_factor(sys.transposed(), route);
    out.outer = StateSpaceModel(sys.A, f.H.transpose(), sys.C, f.J.transpose(),
                                Domain::ContinuousS);
    out.Y = f.Y;
    out.route = f.route;
  }
  return out;
}

}  // namespace ioest
