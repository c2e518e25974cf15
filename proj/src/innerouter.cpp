#include "ioest/innerouter.hpp"

#include <cmath>
#include <numbers>

#include "ioest/kernels.hpp"

namespace ioest {
namespace {

[[noreturn]] void rethrow_tagged(const Error& e, const std::string& stage) {
  throw Error(e.code(), stage + ": " + e.what());
}

std::string regularity_message(const RegularityReport& r) {
  return "not regular: delta(PPsim)=" + std::to_string(r.macmillan_deg_PPsim) + " < " +
         std::to_string(2 * r.macmillan_deg_P);
}

void require_minimal(const StateSpaceModel& P) {
  const MinimalityReport mr = reachability_observability_check(P);
  if (!mr.minimal) {
    throw Error(ErrorCode::NotMinimal,
                "realization is not minimal: reachability rank " +
                    std::to_string(mr.reachability_rank) + ", observability rank " +
                    std::to_string(mr.observability_rank) + ", n = " + std::to_string(mr.n));
  }
}

double rel_diff(const Matrix& lhs, const Matrix& rhs) {
  return (lhs - rhs).norm() / (1.0 + lhs.norm() + rhs.norm());
}

GreenFactors green_control_impl(const StateSpaceModel& P, double tol, bool check_regularity) {
  P.validate();
  if (P.is_discrete()) throw Error(ErrorCode::InvalidArgument, "expected a continuous plant");
  if (!P.is_stable()) throw Error(ErrorCode::NotStable, "plant is not stable");
  require_minimal(P);
  if (check_regularity) {
    const RegularityReport reg = regularity_check(P, tol);
    if (!reg.regular) throw Error(ErrorCode::NotRegular, regularity_message(reg));
  }

  const int n = P.n();
  const Matrix& A = P.A;
  const Matrix& C = P.C;
  const Matrix& D = P.H;

  GreenFactors g;
  // Step 1.
  g.Q = solve_lyapunov_continuous(A.transpose(), C.transpose() * C).X;
  // Step 2.
  const SpectralFactor sf = spectral_factor_continuous(P, FactorOrientation::Control);
  g.J = sf.outer.H;
  g.H = sf.outer.C;
  g.outer = sf.outer;
  // Step 3.
  g.X = solve_lyapunov_continuous(A.transpose(), g.H.transpose() * g.H).X;

  // Step 4.
  const SymEig eig = symeig(g.Q - g.X);
  const double scale = std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  const double cut = tol * scale;
  int kept = 0;
  for (int i = 0; i < n; ++i) {
    if (eig.values(i) > cut) ++kept;
  }
  g.ell = kept;
  if (g.ell > 0 && g.ell < n) {
    const double smallest_kept = eig.values(n - g.ell);
    const double largest_dropped = eig.values.head(n - g.ell).cwiseAbs().maxCoeff();
    g.gap_ratio = largest_dropped > 0.0 ? smallest_kept / largest_dropped
                                        : std::numeric_limits<double>::infinity();
  } else {
    g.gap_ratio = std::numeric_limits<double>::infinity();
  }
  if (g.gap_ratio < kGapRatio) {
    throw Error(ErrorCode::RankDecisionAmbiguous,
                "eigenvalue gap of Q - X is " + std::to_string(g.gap_ratio) + " < " +
                    std::to_string(kGapRatio));
  }
  g.V = eig.V;

  // Step 5.
  const int k = n - g.ell;
  const int l = g.ell;
  const Matrix Av = g.V * A * g.V.transpose();
  const Matrix Cv = C * g.V.transpose();
  const Matrix Hv = g.H * g.V.transpose();
  const Matrix A22 = Av.bottomRightCorner(l, l);
  const Matrix C1 = Cv.leftCols(k);
  const Matrix C2 = Cv.rightCols(l);
  const Matrix H1 = Hv.leftCols(k);
  const Matrix H2 = Hv.rightCols(l);
  g.Sigma = sym((g.V * (g.Q - g.X) * g.V.transpose()).bottomRightCorner(l, l));

  // Step 6.
  Matrix lhs(C.rows(), k + D.cols());
  lhs << C1, D;
  Matrix rhs(g.J.rows(), k + g.J.cols());
  rhs << H1, g.J;
  Matrix U = lhs * rhs.completeOrthogonalDecomposition().pseudoInverse();
  g.step6_residual = (lhs - U * rhs).norm() / (1.0 + lhs.norm());
  if (g.step6_residual > 1e-6) {
    throw Error(ErrorCode::VerificationFailed,
                "step 6: [C1 D] is not in the row space of [H1 J] (residual " +
                    std::to_string(g.step6_residual) + ")");
  }
  {
    Eigen::JacobiSVD<Matrix> svd(U, Eigen::ComputeThinU | Eigen::ComputeThinV);
    U = svd.matrixU() * svd.matrixV().transpose();
  }
  g.U = U;

  // Step 7.
  g.Chat = U * H2 - C2;
  if (l > 0) {
    g.Bhat = g.Sigma.ldlt().solve(C2.transpose() * U - H2.transpose());
  } else {
    g.Bhat = Matrix::Zero(0, U.cols());
  }
  g.Ahat = A22 + g.Bhat * H2;
  g.inner = StateSpaceModel(g.Ahat, g.Bhat, g.Chat, U, Domain::ContinuousS);
  return g;
}

FactorizationResult green_estimation_impl(const StateSpaceModel& P, double tol,
                                          bool check_regularity) {
  FactorizationResult res;
  res.plant_continuous = P;
  res.green = green_control_impl(P.transposed(), tol, check_regularity);
  const GreenFactors& g = res.green;
  res.P_outer = StateSpaceModel(P.A, g.H.transpose(), P.C, g.J.transpose(), Domain::ContinuousS,
                                P.Q_proc, P.R_meas);
  res.P_inner = StateSpaceModel(g.Ahat.transpose(), g.Chat.transpose(), g.Bhat.transpose(),
                                g.U.transpose(), Domain::ContinuousS);
  res.ell = g.ell;
  res.V = g.V;
  res.Sigma_block = g.Sigma;
  res.U = g.U;
  return res;
}

int count_unstable(const std::vector<Complex>& zeros, Domain domain) {
  int count = 0;
  for (const auto& z : zeros) {
    if (domain == Domain::DiscreteZ ? std::abs(z) > 1.0 : z.real() > 0.0) ++count;
  }
  return count;
}

}  // namespace

GreenFactors green_factorize_control(const StateSpaceModel& P_cont, double tol) {
  return green_control_impl(P_cont, tol, true);
}

FactorizationResult green_factorize_estimation(const StateSpaceModel& P_cont, double tol) {
  FactorizationResult res = green_estimation_impl(P_cont, tol, true);
  res.regularity = regularity_check(P_cont, tol);
  res.checks = check_factorization(P_cont, res.P_outer, res.P_inner, res.ell);
  return res;
}

FactorizationResult factorize_discrete(const StateSpaceModel& P, const DiscreteFactorOptions& opt) {
  P.validate();
  if (!P.is_discrete()) throw Error(ErrorCode::InvalidArgument, "expected a discrete plant");
  if (!P.is_stable()) throw Error(ErrorCode::NotStable, "plant is not stable");
  require_minimal(P);

  RegularityReport reg;
  try {
    reg = regularity_check(P, opt.tol);
  } catch (const Error& e) {
    rethrow_tagged(e, "regularity");
  }
  if (!reg.regular) throw Error(ErrorCode::NotRegular, regularity_message(reg));

  const int m = P.m();
  const Matrix CG = P.C * P.G;
  const bool h_zero = P.H.norm() <= 1e-12 * (1.0 + P.C.norm() * P.G.norm());
  bool shifted = false;
  StateSpaceModel target = P;
  if (h_zero) {
    if (numerical_rank(CG, opt.tol).rank < m) {
      throw Error(ErrorCode::SingularFeedthrough,
                  "H = 0 and rank(CG) < m: relative degree above one is not supported");
    }
    // z P(z) = CG + CA (zI - A)^{-1} G keeps the one-step delay out of Pi.
    target = StateSpaceModel(P.A, P.G, P.C * P.A, CG, Domain::DiscreteZ);
    shifted = true;
  }

  StateSpaceModel cont;
  try {
    cont = tustin_to_continuous(target, opt.omega0);
  } catch (const Error& e) {
    rethrow_tagged(e, "tustin");
  }
  FactorizationResult res;
  try {
    res = green_estimation_impl(cont, opt.tol, false);
  } catch (const Error& e) {
    rethrow_tagged(e, "factorize");
  }

  StateSpaceModel Po;
  StateSpaceModel Pi;
  try {
    Po = tustin_to_discrete(res.P_outer, opt.omega0);
    Pi = tustin_to_discrete(res.P_inner, opt.omega0);
  } catch (const Error& e) {
    rethrow_tagged(e, "tustin back");
  }

  // The outer factor shares A and C with the plant; remove the round-off that
  // the two bilinear maps introduced.
  const auto snap = [](Matrix& value, const Matrix& exact) {
    if ((value - exact).norm() <= 1e-8 * (1.0 + exact.norm())) value = exact;
  };
  snap(Po.A, target.A);
  snap(Po.C, target.C);

  if (shifted) {
    res.shift_residual = rel_diff(P.C * Po.G, Po.H);
    Po = StateSpaceModel(P.A, Po.G, P.C, Matrix::Zero(P.p(), Po.m()), Domain::DiscreteZ);
  }
  Po.Q_proc = P.Q_proc;
  Po.R_meas = P.R_meas;

  res.P_outer = Po;
  res.P_inner = Pi;
  res.regularity = reg;
  res.shifted = shifted;
  res.checks = check_factorization(P, Po, Pi, res.ell, opt.grid_points);
  return res;
}

// --------------------------------------------------------------------------

InnerReport verify_inner(const StateSpaceModel& sys, const FrequencyGrid& grid, double tol) {
  const auto r = sys.p();
  InnerReport rep;
  rep.max_residual = kernels::max_over(grid.count(), [&](std::size_t k) {
    const CMatrix Pz = eval_freq(sys, grid.points[k]);
    const CMatrix Pt = eval_paraconjugate(sys, grid.points[k]);
    return (Pz * Pt - CMatrix::Identity(r, r)).norm();
  });
  if (grid.count() == 0) rep.max_residual = 0.0;
  rep.pass = rep.max_residual < tol;
  return rep;
}

double outerness_scan(const StateSpaceModel& sys, int boundary_points, int contour_points) {
  std::vector<Complex> pts;
  const auto add_circle = [&](double radius, int count) {
    for (int k = 0; k < count; ++k) {
      // Half-step offset keeps z = -1 (s = infinity) off the scan.
      const double theta = 2.0 * std::numbers::pi * (k + 0.5) / count;
      const Complex z = std::polar(radius, theta);
      pts.push_back(sys.is_discrete() ? z : tustin_z_to_s(z));
    }
  };
  add_circle(1.0, boundary_points);
  add_circle(1.05, contour_points);
  add_circle(1.5, contour_points);
  return min_singular_value(sys, pts);
}

FactorizationChecks check_factorization(const StateSpaceModel& P, const StateSpaceModel& Po,
                                        const StateSpaceModel& Pi, int ell, int grid_points) {
  FactorizationChecks c;
  const FrequencyGrid grid = FrequencyGrid::verification(P.domain, grid_points);

  c.innerness = verify_inner(Pi, grid).max_residual;
  c.innerness_ok = c.innerness < 1e-7;

  c.product = kernels::max_over(grid.count(), [&](std::size_t k) {
    const Complex z = grid.points[k];
    return (eval_freq(P, z) - eval_freq(Po, z) * eval_freq(Pi, z)).norm();
  });
  c.product_scale = kernels::max_over(grid.count(), [&](std::size_t k) {
    return eval_freq(P, grid.points[k]).norm();
  });
  c.product_ok = c.product < 1e-6 * (1.0 + c.product_scale);

  c.outer_min_sv = outerness_scan(Po);
  c.outerness_ok = c.outer_min_sv > 1e-6;

  c.ell_rank = ell;
  c.ell_ok = Pi.n() == ell;
  if (c.ell_ok && P.p() == P.m()) {
    try {
      c.ell_ok = count_unstable(transmission_zeros_square(P), P.domain) == ell;
    } catch (const Error&) {
      // Shapes without a closed-form inverse are certified by the scan alone.
    }
  }

  const auto poles = eigenvalues(Pi.A);
  c.inner_pole_count = static_cast<int>(poles.size());
  if (Pi.n() > 0) {
    c.inner_pole_radius = P.is_discrete() ? spectral_radius(Pi.A) : spectral_abscissa(Pi.A);
  }
  c.inner_poles_ok = c.inner_pole_count == ell && Pi.is_stable();
  return c;
}

// --------------------------------------------------------------------------

CascadeRealization build_cascade(const FactorizationResult& result, double tol) {
  const GreenFactors& g = result.green;
  const StateSpaceModel& P = result.plant_continuous;
  const int n = P.n();
  const int l = result.ell;
  const int k = n - l;
  if (g.V.rows() != n || g.Ahat.rows() != l || g.H.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "cascade: factorization does not match the plant");
  }

  const Matrix Av = g.V * P.A * g.V.transpose();
  const Matrix Bv = g.V * P.G;
  const Matrix Cv = P.C * g.V.transpose();
  const Matrix Hv = g.H * g.V.transpose();
  const Matrix A12 = Av.topRightCorner(k, l);
  const Matrix A22 = Av.bottomRightCorner(l, l);
  const Matrix B1 = Bv.topRows(k);
  const Matrix B2 = Bv.bottomRows(l);
  const Matrix C2 = Cv.rightCols(l);
  const Matrix H1t = Hv.leftCols(k).transpose();
  const Matrix H2t = Hv.rightCols(l).transpose();
  const Matrix Bht = g.Bhat.transpose();
  const Matrix Ut = g.U.transpose();
  const Matrix Jt = g.J.transpose();

  CascadeRealization out;
  out.identity_residuals = {
      rel_diff(H1t * Bht, -A12),
      rel_diff(H2t * Bht, g.Ahat.transpose() - A22),
      rel_diff(Jt * Bht, -C2),
      rel_diff(H1t * Ut, B1),
      rel_diff(H2t * Ut, g.Chat.transpose() + B2),
      rel_diff(Jt * Ut, P.H),
  };
  for (std::size_t i = 0; i < out.identity_residuals.size(); ++i) {
    if (!(out.identity_residuals[i] <= tol)) {
      throw Error(ErrorCode::IdentityViolation,
                  std::string("cascade identity ") + kCascadeIdentityNames[i] +
                      " violated (relative residual " +
                      std::to_string(out.identity_residuals[i]) + ")");
    }
  }

  const int N = n + l;
  const Matrix Ht = g.H.transpose();
  Matrix A(N, N);
  A << g.Ahat.transpose(), Matrix::Zero(l, n), Ht * Bht, P.A;
  Matrix B(N, P.m());
  B << g.Chat.transpose(), Ht * Ut;
  Matrix C(P.p(), N);
  C << Jt * Bht, P.C;
  out.raw = StateSpaceModel(A, B, C, Jt * Ut, Domain::ContinuousS);

  Matrix M = Matrix::Identity(N, N);
  M.bottomRightCorner(n, n) = g.V;
  out.T = Matrix::Identity(N, N);
  out.T.bottomLeftCorner(l, l) = -Matrix::Identity(l, l);
  const Matrix S = out.T * M;
  Matrix Tinv = Matrix::Identity(N, N);
  Tinv.bottomLeftCorner(l, l) = Matrix::Identity(l, l);
  const Matrix Sinv = M.transpose() * Tinv;
  out.transformed = StateSpaceModel(S * A * Sinv, S * B, C * Sinv, out.raw.H, Domain::ContinuousS);
  out.output_zero_block = out.transformed.C.leftCols(l).norm();

  out.discrete = series(result.P_inner, result.P_outer);
  return out;
}

}  // namespace ioest
