#pragma once

#include <array>
#include <string>

#include "ioest/matrixeq.hpp"
#include "ioest/statespace.hpp"

namespace ioest {

/// Green's factorization in control ordering, P = Pi Po with Pi~ Pi = I and
/// Po = J + H (sI - A)^{-1} B. Every intermediate of the seven steps is kept.
struct GreenFactors {
  StateSpaceModel inner;
  StateSpaceModel outer;
  int ell = 0;
  Matrix Q;      ///< observability Gramian of P
  Matrix X;      ///< observability Gramian of Po
  Matrix V;      ///< orthogonal, V (Q - X) V^T = diag(0, Sigma)
  Matrix Sigma;  ///< ell x ell
  Matrix U;
  Matrix Ahat, Bhat, Chat;
  Matrix H, J;
  double gap_ratio = 0.0;
  /// || [C1 D] - U [H1 J] || before U was projected onto the orthogonal group.
  double step6_residual = 0.0;
};

/// Continuous-time factorization of a stable, minimal, regular plant whose
/// feedthrough has full row rank.
GreenFactors green_factorize_control(const StateSpaceModel& P_cont, double tol = kRankTol);

/// Residuals of the factorization invariants, evaluated in the domain of the
/// factors.
struct FactorizationChecks {
  double innerness = 0.0;        ///< max || Pi Pi~ - I ||_F
  double product = 0.0;          ///< max || P - Po Pi ||_F
  double product_scale = 0.0;    ///< max || P ||_F on the grid
  double outer_min_sv = 0.0;     ///< min sigma_min(Po) over the outerness scan
  int ell_rank = 0;              ///< rank(Q - X)
  int inner_pole_count = 0;
  double inner_pole_radius = 0.0;  ///< spectral radius / abscissa of Pi
  bool innerness_ok = false;
  bool product_ok = false;
  bool outerness_ok = false;
  bool ell_ok = false;
  bool inner_poles_ok = false;

  bool pass() const {
    return innerness_ok && product_ok && outerness_ok && ell_ok && inner_poles_ok;
  }
};

/// Estimation-ordering factorization P = Po Pi.
struct FactorizationResult {
  StateSpaceModel P_outer;  ///< p x m, shares A and C with P
  StateSpaceModel P_inner;  ///< m x m, realization U^T + Bhat^T (zI - Ahat^T)^{-1} Chat^T
  int ell = 0;
  Matrix V;
  Matrix Sigma_block;
  Matrix U;
  /// The continuous plant that was factored and the control-ordering factors of
  /// its transpose.
  StateSpaceModel plant_continuous;
  GreenFactors green;
  RegularityReport regularity;
  /// True when z P(z) was factored to keep the zeros at infinity of a strictly
  /// proper plant out of the inner factor.
  bool shifted = false;
  /// || C Go_shifted - Do_shifted ||, only meaningful when `shifted`.
  double shift_residual = 0.0;
  FactorizationChecks checks;
};

/// Continuous estimation-ordering factorization via the transpose.
FactorizationResult green_factorize_estimation(const StateSpaceModel& P_cont,
                                               double tol = kRankTol);

struct DiscreteFactorOptions {
  double omega0 = 1.0;
  double tol = kRankTol;
  int grid_points = 256;
};

/// Discrete pipeline: Tustin to s, factor, Tustin back. Strictly proper plants
/// with rank(CG) = m are factored as z P(z) so that Po keeps H_o = 0.
FactorizationResult factorize_discrete(const StateSpaceModel& P_disc,
                                       const DiscreteFactorOptions& options = {});

struct InnerReport {
  double max_residual = 0.0;
  bool pass = false;
};

/// max over the grid of || P P~ - I ||_F.
InnerReport verify_inner(const StateSpaceModel& sys, const FrequencyGrid& grid, double tol = 1e-7);

/// min sigma_min(P) over the stability boundary and two outer contours
/// (|z| = 1.05 and 1.5, or their Tustin images in s).
double outerness_scan(const StateSpaceModel& sys, int boundary_points = 512, int contour_points = 128);

/// Evaluates every invariant of a factorization of `P` (same domain as the
/// factors).
FactorizationChecks check_factorization(const StateSpaceModel& P, const StateSpaceModel& P_outer,
                                        const StateSpaceModel& P_inner, int ell,
                                        int grid_points = 256);

/// The (n + ell)-state realization of Po Pi, before and after the change of
/// coordinates that decouples the inner state from the output.
struct CascadeRealization {
  StateSpaceModel raw;          ///< continuous, state (x_i, x_o)
  StateSpaceModel transformed;  ///< continuous, state (x_i, x_o1, x_o2 - x_i) in V coordinates
  Matrix T;                     ///< transformed state = T * blockdiag(I, V) * raw state
  StateSpaceModel discrete;     ///< discrete cascade of the discrete factors, state (x_i, x_o)
  /// Residuals of H1'Bh' = -A12, H2'Bh' = Ah' - A22, J'Bh' = -C2,
  /// H1'U' = B1, H2'U' = Ch' + B2, J'U' = D, in that order.
  std::array<double, 6> identity_residuals{};
  double output_zero_block = 0.0;
};

inline constexpr std::array<const char*, 6> kCascadeIdentityNames = {
    "H1'Bhat' = -A12", "H2'Bhat' = Ahat' - A22", "J'Bhat' = -C2",
    "H1'U' = B1",      "H2'U' = Chat' + B2",     "J'U' = D"};

/// Throws IdentityViolation naming the first identity off by more than
/// `tol` (relative to the size of its terms).
CascadeRealization build_cascade(const FactorizationResult& result, double tol = 1e-8);

}  // namespace ioest
