#pragma once

#include <string>

#include "ioest/statespace.hpp"

namespace ioest {

struct LyapunovSolution {
  Matrix X;
  double residual_norm = 0.0;
};

/// Solves A X + X A^T + W = 0 for Hurwitz A by Kronecker vectorization.
/// For the observability orientation Q A + A^T Q + C^T C = 0 pass A^T.
LyapunovSolution solve_lyapunov_continuous(const Matrix& A, const Matrix& W);

/// Solves A X A^T - X + W = 0 for Schur-stable A.
LyapunovSolution solve_lyapunov_discrete(const Matrix& A, const Matrix& W);

/// Solution of a Riccati equation plus the data needed to audit it.
struct RiccatiSolution {
  Matrix X;
  Matrix gain;
  double residual_norm = 0.0;
  /// rho(A - L C) for the DARE, max Re eig(A - B K) for the CARE.
  double closed_loop = 0.0;
  std::string method;
  /// Factor by which the process-noise term was divided before iterating.
  double scaling = 1.0;
  int iterations = 0;
};

/// Filter-form DARE
///   S = A S A^T - A S C^T (C S C^T + R)^{-1} C S A^T + Q,
/// with predictor gain L = A S C^T (C S C^T + R)^{-1}. Uses structure-preserving
/// doubling on a problem rescaled by ||Q||; falls back to damped fixed-point
/// iteration if doubling fails to converge.
RiccatiSolution solve_dare(const Matrix& A, const Matrix& C, const Matrix& Q, const Matrix& R);

/// Control-form CARE  A^T X + X A - X B R^{-1} B^T X + Q = 0, gain K = R^{-1} B^T X.
/// Stabilizing solution via the Hamiltonian matrix-sign iteration, polished by
/// Newton-Kleinman steps.
RiccatiSolution solve_care(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R);

struct SymEig {
  Matrix V;  ///< orthogonal, V S V^T = diag(values)
  Vector values;  ///< ascending
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (symmetrized first).
SymEig symeig(const Matrix& S);

/// Symmetric PSD square root (negative eigenvalues clipped to zero).
Matrix psd_sqrt(const Matrix& S);

/// Matrix sign function by scaled Newton iteration. Throws IterationDiverged if
/// M has eigenvalues on the imaginary axis (within tolerance).
Matrix matrix_sign(const Matrix& M, int max_iter = 100);

enum class FactorOrientation {
  /// P~ P = Po~ Po, Po = J + H (sI - A)^{-1} B  (shares A and B with P)
  Control,
  /// P P~ = Po Po~, Po = D_o + C (sI - A)^{-1} B_o  (shares A and C with P)
  Estimation,
};

/// Which construction produced the spectral factor. ZeroReflection handles
/// single-input single-output plants whose feedthrough vanishes, by mirroring
/// right-half-plane numerator roots.
enum class FactorRoute { Riccati, InvariantSubspace, ZeroReflection };

struct SpectralFactor {
  StateSpaceModel outer;
  /// Y = Q - X, the difference between the Gramians of P and of the factor.
  Matrix Y;
  FactorRoute route = FactorRoute::Riccati;
};

/// Outer spectral factor of a stable continuous plant.
///
/// In the control orientation the plant must have a feedthrough with full row
/// rank; in the estimation orientation, full column rank. Square plants use the
/// CARE route, non-square plants the invariant-subspace route (which restricts
/// the anti-stable subspace to the directions of genuine transmission zeros).
/// Both routes can be forced for cross-checking. The feedthrough of the factor
/// is normalized to be upper (control) or lower (estimation) trapezoidal with a
/// nonnegative diagonal.
SpectralFactor spectral_factor_continuous(const StateSpaceModel& sys,
                                          FactorOrientation orientation,
                                          std::optional<FactorRoute> route = std::nullopt);

}  // namespace ioest
