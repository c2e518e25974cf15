#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace ioest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

/// Relative singular-value threshold used for every numerical rank decision.
inline constexpr double kRankTol = 1e-8;

/// Minimum ratio between the last kept and first discarded singular value.
inline constexpr double kGapRatio = 10.0;

enum class ErrorCode {
  DimensionMismatch,
  InvalidArgument,
  NearPole,
  PoleAtMinusOne,
  PoleAtOmega0,
  SingularGramian,
  RankAmbiguous,
  NotSquareInvertible,
  UnstableA,
  NotDetectable,
  NotStabilizable,
  IterationDiverged,
  SingularFeedthrough,
  RiccatiFailure,
  NotRegular,
  NotStable,
  NotMinimal,
  RankDecisionAmbiguous,
  IdentityViolation,
  VerificationFailed,
  RankCGDeficient,
  AssumptionHNotZero,
  InnovationGramSingular,
  TooFewSamples,
  GridMismatch,
  CurveTooFlat,
  ParseError,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. `code()` is stable and machine readable; `what()`
/// carries a one-line human explanation.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Numerical rank with the global relative threshold. Also reports the ratio
/// between the last retained and the first dropped singular value (infinity
/// when nothing is dropped or the dropped value is exactly zero).
struct RankInfo {
  int rank = 0;
  double gap_ratio = 0.0;
  double sigma_max = 0.0;
};

RankInfo numerical_rank(const Matrix& M, double tol = kRankTol, double scale = 0.0);

/// Symmetric part, (M + M^T) / 2.
inline Matrix sym(const Matrix& M) { return 0.5 * (M + M.transpose()); }

/// Largest eigenvalue modulus.
double spectral_radius(const Matrix& A);

/// Largest real part of the eigenvalues.
double spectral_abscissa(const Matrix& A);

}  // namespace ioest
