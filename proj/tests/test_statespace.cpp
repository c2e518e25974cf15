#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "ioest/statespace.hpp"
#include "oracles.hpp"

using namespace ioest;
using C = std::complex<double>;

namespace {

const std::vector<C> kPoles{0.5, 0.7, C(0, 0.5), C(0, -0.5)};
const std::vector<C> kZeros{2.0, 3.0, 0.9, 0.8};

StateSpaceModel tf(const std::vector<C>& zeros, const std::vector<C>& poles, double gain) {
  std::vector<double> num = oracle::poly(zeros);
  for (double& c : num) c *= gain;
  const std::vector<double> den = oracle::poly(poles);
  return from_transfer_function(num, den);
}

StateSpaceModel random_stable(std::mt19937_64& rng, int n, int m, int p) {
  std::normal_distribution<double> N;
  Matrix A(n, n), G(n, m), Cm(p, n), H(p, m);
  for (auto* M : {&A, &G, &Cm, &H}) {
    for (Eigen::Index i = 0; i < M->size(); ++i) M->data()[i] = N(rng);
  }
  A *= 0.8 / spectral_radius(A);
  return StateSpaceModel(A, G, Cm, H);
}

}  // namespace

TEST_CASE("eval_freq on simple systems") {
  StateSpaceModel s(Matrix::Constant(1, 1, 0.5), Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                    Matrix::Zero(1, 1));
  CHECK(std::abs(eval_freq(s, 1.0)(0, 0) - 2.0) < 1e-15);
  CHECK_THROWS_AS(eval_freq(s, 0.5), Error);
  try {
    eval_freq(s, 0.5);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NearPole);
  }

  const StateSpaceModel P = tf(kZeros, kPoles, 1.0);
  const double expected = (-1.0) * (-2.0) * 0.1 * 0.2 / (0.5 * 0.3 * 1.25);
  CHECK(std::abs(eval_freq(P, 1.0)(0, 0) - expected) < 1e-13);
  CHECK(expected == doctest::Approx(0.2133333333333));
}

TEST_CASE("canonical realization matches the rational function") {
  const StateSpaceModel P = tf(kZeros, kPoles, 1.0);
  for (double w : {0.1, 0.7, 1.9, 3.0}) {
    const C z = std::polar(1.0, w);
    CHECK(std::abs(eval_freq(P, z)(0, 0) - oracle::rational(kZeros, kPoles, 1.0, z)) < 1e-12);
  }
  const StateSpaceModel Pi = tf({2.0, 3.0}, {0.5, 1.0 / 3.0}, 1.0 / 6.0);
  CHECK(std::abs(std::abs(eval_freq(Pi, std::polar(1.0, std::numbers::pi / 3))(0, 0)) - 1.0) < 1e-10);
}

TEST_CASE("series connection multiplies responses") {
  std::mt19937_64 rng(5);
  const StateSpaceModel a = random_stable(rng, 3, 2, 2);
  const StateSpaceModel b = random_stable(rng, 2, 2, 1);
  const StateSpaceModel ab = series(a, b);
  const C z = std::polar(1.0, 0.4);
  CHECK((eval_freq(ab, z) - eval_freq(b, z) * eval_freq(a, z)).norm() < 1e-12);
}

TEST_CASE("frequency grids lie on their contours") {
  for (const FrequencyGrid& g : {FrequencyGrid::unit_circle(64), FrequencyGrid::unit_circle_log(64)}) {
    for (C z : g.points) CHECK(std::abs(std::abs(z) - 1.0) < 1e-12);
  }
  for (C s : FrequencyGrid::imaginary_axis_log(64, 2.0).points) CHECK(std::abs(s.real()) < 1e-12);
  const auto log = FrequencyGrid::unit_circle_log(32);
  CHECK(std::arg(log.points.front()) == doctest::Approx(std::numbers::pi * 1e-4));
}

TEST_CASE("Tustin maps preserve the frequency response") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const StateSpaceModel d = random_stable(rng, 1 + trial % 4, 1 + trial % 2, 1 + trial % 3);
    for (double w0 : {1.0, 2.5}) {
      const StateSpaceModel c = tustin_to_continuous(d, w0);
      CHECK(c.domain == Domain::ContinuousS);
      const C s(0.0, 0.37);
      CHECK((eval_freq(c, s) - eval_freq(d, tustin_s_to_z(s, w0))).norm() < 1e-10);
      const StateSpaceModel back = tustin_to_discrete(c, w0);
      const C z = std::polar(1.0, 1.1);
      CHECK((eval_freq(back, z) - eval_freq(d, z)).norm() < 1e-10);
    }
  }
  StateSpaceModel bad(Matrix::Constant(1, 1, -1.0), Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                      Matrix::Zero(1, 1));
  try {
    tustin_to_continuous(bad);
    FAIL("expected PoleAtMinusOne");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PoleAtMinusOne);
  }
}

TEST_CASE("Markov parameters agree with simulated impulse responses") {
  std::mt19937_64 rng(3);
  const StateSpaceModel s = random_stable(rng, 4, 2, 3);
  const auto h = markov_parameters(s, 12);
  const auto ref = oracle::impulse_response(s, 12);
  for (int k = 0; k < 12; ++k) CHECK((h[k] - ref[k]).norm() < 1e-12 * (1.0 + ref[k].norm()));
}

TEST_CASE("observability Gramian and state reconstruction") {
  std::mt19937_64 rng(8);
  const StateSpaceModel s = random_stable(rng, 4, 1, 1);
  const GramianReport g = observability_gramian_finite(s.A, s.C, 6);
  Matrix ref = Matrix::Zero(4, 4);
  Matrix Ak = Matrix::Identity(4, 4);
  for (int j = 0; j < 6; ++j) {
    ref += Ak.transpose() * s.C.transpose() * s.C * Ak;
    Ak = s.A * Ak;
  }
  CHECK((g.W_o - ref).norm() < 1e-12 * ref.norm());
  CHECK(g.rank == 4);
  CHECK(g.invertible);
  CHECK(observability_gramian_finite(s.A, s.C, 2).rank == 2);

  // Noise-free free response: y'_k = C A^k x.
  Vector x0(4);
  x0 << 1.0, -2.0, 0.5, 3.0;
  std::vector<Vector> ys;
  Vector x = x0;
  for (int k = 0; k < 6; ++k) {
    ys.push_back(s.C * x);
    x = s.A * x;
  }
  CHECK((reconstruct_state(s, ys, 6) - x0).norm() < 1e-8);
  CHECK_THROWS_AS(reconstruct_state(s, std::span<const Vector>(ys).first(2), 2), Error);
}

TEST_CASE("minimality check") {
  const StateSpaceModel P = tf(kZeros, kPoles, 1.0);
  CHECK(reachability_observability_check(P).minimal);
  // An unobservable extra state.
  Matrix A = Matrix::Zero(5, 5);
  A.topLeftCorner(4, 4) = P.A;
  A(4, 4) = 0.2;
  Matrix G(5, 1);
  G << P.G, 1.0;
  Matrix Cm(1, 5);
  Cm << P.C, 0.0;
  const MinimalityReport r = reachability_observability_check(StateSpaceModel(A, G, Cm, P.H));
  CHECK_FALSE(r.minimal);
  CHECK(r.reachability_rank == 5);
  CHECK(r.observability_rank == 4);
}

TEST_CASE("regularity of the scalar example and of its outer factor") {
  const StateSpaceModel P = tf(kZeros, kPoles, 1.0);
  const RegularityReport r = regularity_check(P);
  CHECK(r.macmillan_deg_P == 4);
  CHECK(r.macmillan_deg_PPsim == 6);
  CHECK_FALSE(r.regular);
  CHECK(r.gap_ratio_P >= kGapRatio);
  CHECK(r.gap_ratio_PPsim >= kGapRatio);

  const StateSpaceModel Po = tf({1.0 / 3.0, 0.9, 0.8}, {0.7, C(0, 0.5), C(0, -0.5)}, 6.0);
  const RegularityReport ro = regularity_check(Po);
  CHECK(ro.macmillan_deg_P == 3);
  CHECK(ro.macmillan_deg_PPsim == 6);
  CHECK(ro.regular);
  CHECK(ro.gap_ratio_PPsim >= kGapRatio);
}

TEST_CASE("regularity of inner products collapses") {
  const StateSpaceModel Pi = tf({2.0}, {0.5}, 0.5);
  const RegularityReport r = regularity_check(Pi);
  CHECK(r.macmillan_deg_P == 1);
  CHECK(r.macmillan_deg_PPsim == 0);
  CHECK_FALSE(r.regular);
}

TEST_CASE("transmission zeros of a biproper scalar plant") {
  const StateSpaceModel P = tf({3.0, 0.9, 0.8}, {0.7, C(0, 0.5), C(0, -0.5)}, 2.0);
  auto z = transmission_zeros_square(P);
  REQUIRE(z.size() == 3);
  std::sort(z.begin(), z.end(), [](C a, C b) { return a.real() < b.real(); });
  CHECK(std::abs(z[0] - 0.8) < 1e-10);
  CHECK(std::abs(z[1] - 0.9) < 1e-10);
  CHECK(std::abs(z[2] - 3.0) < 1e-10);
}

TEST_CASE("validation rejects inconsistent models") {
  CHECK_THROWS_AS(StateSpaceModel(Matrix::Zero(2, 2), Matrix::Zero(3, 1), Matrix::Zero(1, 2),
                                  Matrix::Zero(1, 1))
                      .validate(),
                  Error);
  StateSpaceModel s(Matrix::Zero(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1));
  s.R_meas = Matrix::Constant(1, 1, -1.0);
  CHECK_THROWS_AS(s.validate(), Error);
}
