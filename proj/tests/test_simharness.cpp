#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ioest/simharness.hpp"
#include "oracles.hpp"

using namespace ioest;

namespace {

StateSpaceModel unstable_zero_plant(double q) {
  const double num[] = {1.0, -2.0}, den[] = {1.0, -0.9, 0.18};
  StateSpaceModel P = from_transfer_function(num, den);
  P.Q_proc = q * Matrix::Identity(2, 2);
  P.R_meas = q * Matrix::Identity(1, 1);
  return P;
}

// Noise-free up to measurement noise of standard deviation 1e-12.
StateSpaceModel quiet_plant() {
  StateSpaceModel P = unstable_zero_plant(0.0);
  P.R_meas = 1e-24 * Matrix::Identity(1, 1);
  return P;
}

ScenarioConfig base(const StateSpaceModel& P) {
  ScenarioConfig cfg;
  cfg.plant = P;
  cfg.horizon = 300;
  cfg.seed = 42;
  return cfg;
}

}  // namespace

TEST_CASE("simulation is deterministic per seed and trial") {
  const ScenarioConfig cfg = base(unstable_zero_plant(1e-2));
  const PlantTrajectories a = simulate_plant(cfg, 3), b = simulate_plant(cfg, 3);
  const PlantTrajectories c = simulate_plant(cfg, 4);
  REQUIRE(a.y.size() == 301);
  bool same = true, differs = false;
  for (std::size_t t = 0; t < a.y.size(); ++t) {
    same = same && a.y[t] == b.y[t] && a.x[t] == b.x[t] && a.d[t] == b.d[t];
    differs = differs || a.y[t] != c.y[t];
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("free response follows powers of A") {
  ScenarioConfig cfg = base(quiet_plant());
  cfg.d_model = InputModel::zero();
  const PlantTrajectories tr = simulate_plant(cfg);
  Vector x = tr.x[0];
  CHECK(x.norm() > 0.0);
  for (std::size_t t = 0; t < tr.x.size(); ++t) {
    CHECK((tr.x[t] - x).norm() <= 1e-12 * (1.0 + x.norm()));
    CHECK((tr.y[t] - cfg.plant.C * x).norm() <= 1e-10);
    x = cfg.plant.A * x;
  }
}

TEST_CASE("noise covariance") {
  ScenarioConfig cfg = base(unstable_zero_plant(1e-2));
  cfg.Q = Matrix::Zero(2, 2);
  cfg.Q << 1.0, 0.5, 0.5, 4.0;
  cfg.horizon = 40000;
  const PlantTrajectories tr = simulate_plant(cfg);
  Matrix S = Matrix::Zero(2, 2);
  for (const Vector& w : tr.w) S += w * w.transpose();
  S /= static_cast<double>(tr.w.size());
  for (int i = 0; i < 2; ++i) {
    CHECK(S(i, i) == doctest::Approx(cfg.Q(i, i)).epsilon(0.03));
  }
  CHECK(std::abs(S(0, 1) - 0.5) < 0.03 * 2.0);
}

TEST_CASE("zero-state response is the convolution with the Markov parameters") {
  ScenarioConfig cfg = base(quiet_plant());
  cfg.d_model = InputModel::white();
  cfg.x0_scale = 0.0;
  cfg.horizon = 120;
  const PlantTrajectories tr = simulate_plant(cfg);
  const auto h = oracle::impulse_response(cfg.plant, 121);
  const auto y = oracle::convolve(h, tr.d);
  for (std::size_t t = 0; t < y.size(); ++t) CHECK((tr.y[t] - y[t]).norm() < 1e-10);
}

TEST_CASE("AR input model") {
  ScenarioConfig cfg = base(quiet_plant());
  cfg.d_model = InputModel::ar({Matrix::Constant(1, 1, 0.8)});
  cfg.horizon = 100000;
  const PlantTrajectories tr = simulate_plant(cfg);
  double r0 = 0.0, r1 = 0.0;
  for (std::size_t t = 1; t < tr.d.size(); ++t) {
    r0 += tr.d[t](0) * tr.d[t](0);
    r1 += tr.d[t](0) * tr.d[t - 1](0);
  }
  CHECK(r1 / r0 == doctest::Approx(0.8).epsilon(0.02));
  CHECK(r0 / tr.d.size() == doctest::Approx(oracle::ar1_autocov(0.8, 1.0, 0)).epsilon(0.05));
}

TEST_CASE("factored simulation satisfies the corrected state identity") {
  StateSpaceModel P = unstable_zero_plant(1e-2);
  ScenarioConfig cfg = base(P);
  cfg.d_model = InputModel::ar({Matrix::Constant(1, 1, 0.8)});
  cfg.inner_x0_scale = 2.0;
  const FactorizationResult fr = factorize_discrete(P);
  const CascadeCoupling cc = cascade_coupling(P, fr);
  CHECK(cc.residual < 1e-10);
  CHECK((P.A * cc.T - cc.T * fr.P_inner.A - fr.P_outer.G * fr.P_inner.C).norm() < 1e-10);
  const FactoredTrajectories tr = simulate_factored(cfg, fr);
  // e_t = x^o_t - x_t + T x^i_t satisfies e_t = A^t e_0.
  Vector e = tr.x_o[0] - tr.plant.x[0] + cc.T * tr.x_i[0];
  for (std::size_t t = 0; t < tr.x_o.size(); ++t) {
    const Vector et = tr.x_o[t] - tr.plant.x[t] + cc.T * tr.x_i[t];
    CHECK((et - e).norm() < 1e-9 * (1.0 + tr.plant.x[t].norm()));
    e = P.A * e;
  }

  // From rest the two systems produce the same measurements.
  cfg.x0_scale = 0.0;
  cfg.inner_x0_scale = 0.0;
  const FactoredTrajectories rest = simulate_factored(cfg, fr);
  for (std::size_t t = 0; t < rest.y.size(); ++t) {
    CHECK((rest.y[t] - rest.plant.y[t]).norm() < 1e-9 * (1.0 + rest.plant.y[t].norm()));
  }
}

TEST_CASE("convergence rate fit") {
  std::vector<double> e;
  for (int t = 0; t < 300; ++t) e.push_back(std::pow(0.9, t));
  CHECK(fit_convergence_rate(e) == doctest::Approx(0.9).epsilon(1e-6));

  // A rising transient before the decay is skipped.
  std::vector<double> bump{0.1, 0.5};
  for (int t = 0; t < 100; ++t) bump.push_back(2.0 * std::pow(0.7, t));
  CHECK(fit_convergence_rate(bump) == doctest::Approx(0.7).epsilon(1e-6));

  try {
    fit_convergence_rate(std::vector<double>(50, 0.0));
    FAIL("expected CurveTooFlat");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CurveTooFlat);
  }
  CHECK_THROWS_AS(fit_convergence_rate(std::vector<double>(10, 1.0)), Error);
}

TEST_CASE("configuration validation") {
  ScenarioConfig cfg = base(unstable_zero_plant(1e-2));
  cfg.horizon = 10;
  CHECK_THROWS_AS(cfg.validate(), Error);  // burn-in defaults to 10 n = 20
  cfg.horizon = 100;
  cfg.trials = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.trials = 0;
  CHECK_NOTHROW(cfg.validate());
  const ExperimentReport rep = run_experiment(cfg);
  CHECK(rep.trials.empty());
  CHECK(rep.completed == 0);
  cfg.d_model = InputModel::white(Matrix::Identity(2, 2));
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("experiment on a plant with an unstable zero") {
  ScenarioConfig cfg = base(unstable_zero_plant(1e-4));
  cfg.horizon = 2000;
  cfg.trials = 2;
  cfg.probe_time = 150;
  const ExperimentReport rep = run_experiment(cfg);
  CHECK(rep.ell == 1);
  CHECK(rep.shifted);
  CHECK(rep.coupling_residual < 1e-10);
  REQUIRE(rep.completed == 2);
  for (const TrialReport& t : rep.trials) {
    CHECK(t.error.empty());
    CHECK(t.stage_errors.empty());
    CHECK(t.sise_p_ran);
    CHECK(t.sise_p_diverged);
    CHECK(t.sise_po_ran);
    CHECK_FALSE(t.sise_po_diverged);
    CHECK(t.sise_po_trace_change < 1e-8);
    CHECK(t.probe_error.size() == 2);
  }
  CHECK(rep.sise_p_divergences == 2);
  CHECK(rep.sise_po_divergences == 0);
  CHECK(rep.kf_equivalence_worst < 1e-2);
}

TEST_CASE("biproper plants record the SISE stage failure and continue") {
  const double num[] = {2.0, -0.6}, den[] = {1.0, -0.5};
  StateSpaceModel P = from_transfer_function(num, den);
  P.Q_proc = 1e-2 * Matrix::Identity(1, 1);
  P.R_meas = 1e-2 * Matrix::Identity(1, 1);
  ScenarioConfig cfg = base(P);
  const ExperimentReport rep = run_experiment(cfg);
  REQUIRE(rep.trials.size() == 1);
  const TrialReport& t = rep.trials[0];
  CHECK(t.error.empty());
  CHECK_FALSE(t.sise_p_ran);
  CHECK_FALSE(t.sise_po_ran);
  // SISE on P is skipped because H != 0; SISE on Po is attempted and fails.
  REQUIRE(t.stage_errors.size() == 1);
  CHECK(t.stage_errors[0].rfind("sise on Po: AssumptionHNotZero", 0) == 0);
}

TEST_CASE("high-D filter matches SISE on the outer factor for square plants") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 8; i += 2) {
    CAPTURE(i);
    // Even indices with p = 1 are strictly proper single-output plants.
    const oracle::RandomPlant rp = oracle::random_regular_plant(rng, i);
    if (rp.sys.p() != 1) continue;
    ScenarioConfig cfg = base(rp.sys);
    cfg.horizon = 2000;
    const ExperimentReport rep = run_experiment(cfg);
    REQUIRE(rep.completed == 1);
    CHECK(rep.kf_equivalence_worst < 1e-2);
  }
}
