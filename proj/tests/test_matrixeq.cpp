#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ioest/matrixeq.hpp"
#include "oracles.hpp"

using namespace ioest;

namespace {

Matrix randn(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> N;
  Matrix M(r, c);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = N(rng);
  return M;
}

Matrix hurwitz(std::mt19937_64& rng, int n) {
  Matrix A = randn(rng, n, n);
  return A - (spectral_abscissa(A) + 0.5) * Matrix::Identity(n, n);
}

}  // namespace

TEST_CASE("continuous Lyapunov") {
  std::mt19937_64 rng(1);
  for (int n : {1, 2, 5, 8}) {
    const Matrix A = hurwitz(rng, n);
    const Matrix B = randn(rng, n, 2);
    const Matrix W = B * B.transpose();
    const auto sol = solve_lyapunov_continuous(A, W);
    CHECK((A * sol.X + sol.X * A.transpose() + W).norm() < 1e-10 * (1.0 + W.norm()));
    CHECK((sol.X - sol.X.transpose()).norm() < 1e-12 * sol.X.norm());
  }
}

TEST_CASE("discrete Lyapunov matches the series sum") {
  std::mt19937_64 rng(2);
  Matrix A = randn(rng, 4, 4);
  A *= 0.7 / spectral_radius(A);
  const Matrix W = Matrix::Identity(4, 4);
  Matrix ref = Matrix::Zero(4, 4), Ak = Matrix::Identity(4, 4);
  for (int k = 0; k < 400; ++k) {
    ref += Ak * W * Ak.transpose();
    Ak = A * Ak;
  }
  const auto sol = solve_lyapunov_discrete(A, W);
  CHECK((sol.X - ref).norm() < 1e-10 * ref.norm());
}

TEST_CASE("DARE agrees with fixed-point iteration") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 4, p = 1 + trial % 2;
    Matrix A = randn(rng, n, n);
    A *= (trial % 3 == 0 ? 0.95 : 0.6) / spectral_radius(A);
    const Matrix C = randn(rng, p, n);
    const Matrix Bq = randn(rng, n, n);
    const Matrix Q = Bq * Bq.transpose() + 1e-3 * Matrix::Identity(n, n);
    const Matrix R = Matrix::Identity(p, p);
    const auto sol = solve_dare(A, C, Q, R);
    const Matrix ref = oracle::dare_fixed_point(A, C, Q, R);
    CHECK((sol.X - ref).norm() < 1e-8 * (1.0 + ref.norm()));
    CHECK(sol.closed_loop < 1.0);
    const Matrix L = A * ref * C.transpose() * (C * ref * C.transpose() + R).inverse();
    CHECK((sol.gain - L).norm() < 1e-7 * (1.0 + L.norm()));
  }
}

TEST_CASE("DARE handles large process covariance") {
  const Matrix A = Matrix::Constant(1, 1, 0.5), C = Matrix::Ones(1, 1);
  const Matrix R = Matrix::Ones(1, 1);
  for (double q : {1.0, 1e4, 1e8}) {
    const auto sol = solve_dare(A, C, Matrix::Constant(1, 1, q), R);
    // Scalar closed form: S^2 - (a^2 r - r + q) S - q r = 0 for c = 1.
    const double b = 0.25 - 1.0 + q;
    const double s = 0.5 * (b + std::sqrt(b * b + 4.0 * q));
    CHECK(sol.X(0, 0) == doctest::Approx(s).epsilon(1e-10));
  }
}

TEST_CASE("CARE scalar closed form and random residuals") {
  const auto s = solve_care(Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                            Matrix::Ones(1, 1));
  CHECK(s.X(0, 0) == doctest::Approx(1.0 + std::sqrt(2.0)).epsilon(1e-12));
  CHECK(s.closed_loop < 0.0);

  std::mt19937_64 rng(4);
  for (int n : {2, 3, 6}) {
    const Matrix A = randn(rng, n, n);
    const Matrix B = randn(rng, n, 2);
    const Matrix Cq = randn(rng, n, n);
    const Matrix Q = Cq.transpose() * Cq;
    const Matrix R = Matrix::Identity(2, 2);
    const auto sol = solve_care(A, B, Q, R);
    const Matrix res = A.transpose() * sol.X + sol.X * A -
                       sol.X * B * R.inverse() * B.transpose() * sol.X + Q;
    CHECK(res.norm() < 1e-9 * (1.0 + sol.X.norm()));
    CHECK(spectral_abscissa(A - B * sol.gain) < 0.0);
  }
}

TEST_CASE("symmetric eigendecomposition and square root") {
  std::mt19937_64 rng(5);
  const Matrix M = randn(rng, 6, 6);
  const Matrix S = M * M.transpose();
  const SymEig e = symeig(S);
  CHECK((e.V * e.V.transpose() - Matrix::Identity(6, 6)).norm() < 1e-12);
  CHECK((e.V * S * e.V.transpose() - Matrix(e.values.asDiagonal())).norm() < 1e-10 * S.norm());
  for (int i = 1; i < 6; ++i) CHECK(e.values(i - 1) <= e.values(i));
  const Matrix r = psd_sqrt(S);
  CHECK((r * r - S).norm() < 1e-10 * S.norm());
}

TEST_CASE("matrix sign function") {
  std::mt19937_64 rng(6);
  const Matrix T = randn(rng, 3, 3);
  Vector d(3);
  d << -2.0, 0.5, 3.0;
  const Matrix M = T * d.asDiagonal() * T.inverse();
  const Matrix S = matrix_sign(M);
  Vector sd(3);
  sd << -1.0, 1.0, 1.0;
  const Matrix ref = T * sd.asDiagonal() * T.inverse();
  CHECK((S - ref).norm() < 1e-9 * ref.norm());
  CHECK((S * S - Matrix::Identity(3, 3)).norm() < 1e-9);

  Matrix rot(2, 2);
  rot << 0.0, 1.0, -1.0, 0.0;
  CHECK_THROWS_AS(matrix_sign(rot), Error);
}

TEST_CASE("continuous spectral factors preserve the spectrum") {
  using C = std::complex<double>;
  // (s - 1)/(s + 2): the outer factor is (s + 1)/(s + 2).
  const double num[] = {1.0, -1.0}, den[] = {1.0, 2.0};
  const StateSpaceModel P = from_transfer_function(num, den, Domain::ContinuousS);
  for (auto orient : {FactorOrientation::Control, FactorOrientation::Estimation}) {
    const SpectralFactor f = spectral_factor_continuous(P, orient);
    for (double w : {0.0, 0.3, 2.0, 10.0}) {
      const C s(0.0, w);
      const C po = eval_freq(f.outer, s)(0, 0);
      CHECK(std::abs(std::abs(po) - std::abs((s + 1.0) / (s + 2.0))) < 1e-10);
    }
    CHECK(std::abs(eval_freq(f.outer, C(1.0, 0.0))(0, 0)) > 0.1);
    CHECK(std::abs(eval_freq(f.outer, C(-1.0, 0.0))(0, 0)) < 1e-8);
  }

  // Tall plant, estimation orientation: Po Po~ = P P~ on the axis.
  std::mt19937_64 rng(7);
  const Matrix A = hurwitz(rng, 3);
  const StateSpaceModel T(A, randn(rng, 3, 1), randn(rng, 2, 3), randn(rng, 2, 1),
                          Domain::ContinuousS);
  {
    const SpectralFactor f = spectral_factor_continuous(T, FactorOrientation::Estimation);
    for (double w : {0.1, 1.0, 4.0}) {
      const CMatrix p = eval_freq(T, C(0.0, w));
      const CMatrix o = eval_freq(f.outer, C(0.0, w));
      CHECK((p * p.adjoint() - o * o.adjoint()).norm() < 1e-9 * (1.0 + p.norm() * p.norm()));
    }
  }
}
