// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "ioest/highd.hpp"
#include "ioest/innerouter.hpp"
#include "ioest/simharness.hpp"
#include "oracles.hpp"

using namespace ioest;
using C = std::complex<double>;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

StateSpaceModel tf(const std::vector<C>& zeros, const std::vector<C>& poles, double gain) {
  std::vector<double> num = oracle::poly(zeros);
  for (double& c : num) c *= gain;
  return from_transfer_function(num, oracle::poly(poles));
}

const std::vector<C> kPoles4{0.5, 0.7, C(0, 0.5), C(0, -0.5)};
const std::vector<C> kZeros4{2.0, 3.0, 0.9, 0.8};
const std::vector<C> kPolesO{0.7, C(0, 0.5), C(0, -0.5)};
const std::vector<C> kZerosO{1.0 / 3.0, 0.9, 0.8};

StateSpaceModel unstable_zero_plant(double q) {
  const double num[] = {1.0, -2.0}, den[] = {1.0, -0.9, 0.18};
  StateSpaceModel P = from_transfer_function(num, den);
  P.Q_proc = q * Matrix::Identity(2, 2);
  P.R_meas = q * Matrix::Identity(1, 1);
  return P;
}

std::vector<oracle::RandomPlant> random_plants() {
  std::mt19937_64 rng(2024);
  std::vector<oracle::RandomPlant> out;
  for (int i = 0; i < 20; ++i) out.push_back(oracle::random_regular_plant(rng, i));
  return out;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome c1_scalar_identity() {
  const StateSpaceModel Pi = tf({2.0, 3.0}, {0.5, 1.0 / 3.0}, 1.0 / 6.0);
  double prod = 0.0;
  const FrequencyGrid g = FrequencyGrid::unit_circle(256);
  for (C z : g.points) {
    const C p = oracle::rational(kZeros4, kPoles4, 1.0, z);
    const C po = oracle::rational(kZerosO, kPolesO, 6.0, z);
    const C pi = (z - 2.0) / (2.0 * (z - 0.5)) * (z - 3.0) / (3.0 * (z - 1.0 / 3.0));
    prod = std::max(prod, std::abs(po * pi - p));
  }
  const InnerReport ir = verify_inner(Pi, g, 1e-9);
  return {prod < 1e-9 && ir.max_residual < 1e-9,
          fmt("max|PoPi-P|=%.2e inner residual=%.2e", prod, ir.max_residual)};
}

Outcome c2_regularity() {
  const RegularityReport r = regularity_check(tf(kZeros4, kPoles4, 1.0));
  const RegularityReport ro = regularity_check(tf(kZerosO, kPolesO, 6.0));
  const bool ok = r.macmillan_deg_P == 4 && r.macmillan_deg_PPsim == 6 && !r.regular &&
                  ro.macmillan_deg_P == 3 && ro.regular &&
                  std::min({r.gap_ratio_P, r.gap_ratio_PPsim, ro.gap_ratio_P, ro.gap_ratio_PPsim}) >=
                      kGapRatio;
  std::ostringstream s;
  s << "delta(P)=" << r.macmillan_deg_P << " delta(PP~)=" << r.macmillan_deg_PPsim
    << " regular=" << r.regular << " delta(Po)=" << ro.macmillan_deg_P
    << " delta(PoPo~)=" << ro.macmillan_deg_PPsim << " regular(Po)=" << ro.regular
    << " min gap=" << std::min({r.gap_ratio_P, r.gap_ratio_PPsim, ro.gap_ratio_P, ro.gap_ratio_PPsim});
  return {ok, s.str()};
}

Outcome c3_invariants(const std::vector<oracle::RandomPlant>& plants,
                      std::vector<FactorizationResult>& results) {
  int passed = 0;
  double inner = 0.0, product = 0.0;
  for (const auto& rp : plants) {
    try {
      FactorizationResult r = factorize_discrete(rp.sys);
      const bool ok = r.checks.pass() && r.ell == static_cast<int>(rp.unstable_zeros.size());
      passed += ok;
      inner = std::max(inner, r.checks.innerness);
      product = std::max(product, r.checks.product / (1.0 + r.checks.product_scale));
      results.push_back(std::move(r));
    } catch (const Error& e) {
      std::printf("  plant error: %s\n", e.what());
    }
  }
  return {passed == 20, fmt("%.0f/20 pass, worst innerness=%.1e worst product=%.1e", passed, inner, product)};
}

Outcome c4_convergence(const std::vector<oracle::RandomPlant>& plants,
                       const std::vector<FactorizationResult>& results) {
  if (results.size() != plants.size()) return {false, "factorizations missing"};
  int passed = 0;
  double worst_margin = -1.0, worst_terminal = 0.0;
  for (std::size_t i = 0; i < plants.size(); ++i) {
    ScenarioConfig cfg;
    cfg.plant = plants[i].sys;
    cfg.d_model = InputModel::zero();
    cfg.horizon = 400;
    cfg.inner_x0_scale = 1.0;
    cfg.seed = 100 + i;
    const ExperimentReport rep = run_experiment(cfg, results[i]);
    const TrialReport& t = rep.trials.at(0);
    const double bound = std::max(rep.max_eig_A, rep.max_eig_Ahat) + 0.05;
    const double rate = t.gap_rate.value_or(0.0);
    const double terminal = t.gap_curve.back() / t.gap_curve.front();
    bool ok = t.error.empty() && rate <= bound;
    if (rep.max_eig_A <= 0.9) ok = ok && terminal < 1e-6;
    worst_margin = std::max(worst_margin, rate - bound);
    worst_terminal = std::max(worst_terminal, terminal);
    passed += ok;
  }
  return {passed == 20, fmt("%.0f/20 pass, worst rate-bound=%.3f worst terminal/initial=%.1e", passed,
                            worst_margin, worst_terminal)};
}

Outcome c5_sise_exhibit() {
  ScenarioConfig cfg;
  cfg.plant = unstable_zero_plant(1e-4);
  cfg.horizon = 5000;
  cfg.seed = 7;
  const ExperimentReport rep = run_experiment(cfg);
  const TrialReport& t = rep.trials.at(0);
  const bool ok = t.sise_p_ran && t.sise_p_diverged && t.sise_p_onset < 500 && t.sise_po_ran &&
                  !t.sise_po_diverged && t.sise_po_trace_change < 1e-8;
  return {ok, fmt("SISE-on-P onset=%.0f, SISE-on-Po trace change=%.1e", t.sise_p_onset,
                  t.sise_po_trace_change)};
}

Outcome c6_unbiased() {
  ScenarioConfig cfg;
  cfg.plant = unstable_zero_plant(1e-2);
  cfg.horizon = 200;
  cfg.trials = 500;
  cfg.probe_time = 200;
  cfg.seed = 1;
  const ExperimentReport rep = run_experiment(cfg);
  bool ok = rep.completed == 500;
  std::ostringstream s;
  s << "completed=" << rep.completed;
  for (Eigen::Index i = 0; i < rep.probe_mean.size(); ++i) {
    const double z = rep.probe_mean(i) / rep.probe_stderr(i);
    ok = ok && std::abs(z) <= 3.0;
    s << " mean/se[" << i << "]=" << fmt("%.2f", z);
  }
  return {ok, s.str()};
}

Outcome c7_equivalence() {
  ScenarioConfig cfg;
  cfg.plant = unstable_zero_plant(1e-4);
  cfg.horizon = 5000;
  cfg.epsilon = 1e-8;
  cfg.seed = 7;
  const ExperimentReport rep = run_experiment(cfg);
  const double rel = rep.kf_equivalence_worst;

  const EpsilonSweep sw = epsilon_sweep(cfg.plant, Matrix::Identity(1, 1), {1e-6, 1e-8});
  const double cauchy = sw.entries.back().cauchy;

  const KalmanSteadyState ss = kf_highd_steady(cfg.plant, 1e6 * Matrix::Identity(1, 1));
  const Matrix& S = ss.Sigma_pred;
  const Matrix& A = cfg.plant.A;
  const Matrix& Cm = cfg.plant.C;
  const Matrix Sy = Cm * S * Cm.transpose() + cfg.plant.R_meas;
  const Matrix res = A * S * A.transpose() -
                     A * S * Cm.transpose() * Sy.ldlt().solve(Cm * S * A.transpose()) + ss.Q_total - S;
  const double dare_rel = res.norm() / S.norm();
  const bool ok = rep.completed == 1 && rel < 1e-2 && cauchy < 1e-3 && dare_rel < 1e-6;
  return {ok, fmt("rms diff/rms x=%.1e cauchy=%.1e D=1e6 residual=%.1e", rel, cauchy, dare_rel)};
}

Outcome c8_stats() {
  ScenarioConfig cfg;
  cfg.plant = unstable_zero_plant(1e-4);
  cfg.d_model = InputModel::ar({Matrix::Constant(1, 1, 0.8)});
  cfg.horizon = 100000;
  cfg.seed = 7;
  const ExperimentReport rep = run_experiment(cfg);
  const StatsRecovery& s = rep.stats;
  const bool ok = s.ran && s.rel_rms < 0.10 && s.round_trip < 1e-8;
  return {ok, fmt("interior relative RMS=%.2f%% (pointwise max %.1f%%) round trip=%.1e", 100 * s.rel_rms,
                  100 * s.rel_max, s.round_trip)};
}

Outcome c9_return_difference(const std::vector<oracle::RandomPlant>& plants) {
  const FrequencyGrid grid = FrequencyGrid::unit_circle(128);
  double edr = 0.0, facto = 0.0, perturbed = 1e300;
  std::vector<StateSpaceModel> systems{unstable_zero_plant(1e-2)};
  for (int i = 0; i < 6; ++i) systems.push_back(plants[i].sys);
  for (const StateSpaceModel& P : systems) {
    const KalmanSteadyState ss = kf_highd_steady(P, Matrix::Identity(P.m(), P.m()));
    const auto r = verify_return_difference(P.A, P.C, ss.Q_total, P.R_meas, ss.L, ss.Sigma_pred, grid);
    const auto b = verify_return_difference(P.A, P.C, ss.Q_total, P.R_meas, 1.1 * ss.L, ss.Sigma_pred, grid);
    edr = std::max(edr, r.edr);
    facto = std::max(facto, r.facto);
    perturbed = std::min(perturbed, b.edr);
  }
  return {edr < 1e-8 && facto < 1e-8 && perturbed > 1e-3,
          fmt("edr=%.1e facto=%.1e perturbed edr=%.1e", edr, facto, perturbed)};
}

Outcome c10_tustin() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> N;
  std::uniform_real_distribution<double> U(-0.9, 0.9);
  double worst = 0.0, inner = 0.0;
  const FrequencyGrid circle = FrequencyGrid::unit_circle(64);
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + k % 5, m = 1 + k % 2, p = 1 + (k / 2) % 3;
    Matrix A(n, n), G(n, m), Cm(p, n), H(p, m);
    for (auto* M : {&A, &G, &Cm, &H}) {
      for (Eigen::Index i = 0; i < M->size(); ++i) M->data()[i] = N(rng);
    }
    A *= 0.9 / spectral_radius(A);
    const StateSpaceModel d(A, G, Cm, H);
    const StateSpaceModel back = tustin_to_discrete(tustin_to_continuous(d));
    for (C z : circle.points) {
      const CMatrix ref = eval_freq(d, z);
      worst = std::max(worst, (eval_freq(back, z) - ref).norm() / (1.0 + ref.norm()));
    }

    // Product of one to three real Blaschke factors (1 - a z)/(z - a).
    StateSpaceModel b;
    for (int j = 0; j <= k % 3; ++j) {
      const double a = U(rng);
      const double num[] = {-a, 1.0}, den[] = {1.0, -a};
      const StateSpaceModel f = from_transfer_function(num, den);
      b = j == 0 ? f : series(b, f);
    }
    const StateSpaceModel bc = tustin_to_continuous(b);
    inner = std::max(inner, verify_inner(bc, FrequencyGrid::imaginary_axis_log(64)).max_residual);
  }
  return {worst < 1e-8 && inner < 1e-8, fmt("round trip=%.1e innerness after map=%.1e", worst, inner)};
}

}  // namespace

int main() {
  const auto plants = random_plants();
  std::vector<FactorizationResult> results;

  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "scalar identity", 1.0, c1_scalar_identity},
      {2, "regularity detection", 5.0, c2_regularity},
      {3, "factorization invariants", 60.0, [&] { return c3_invariants(plants, results); }},
      {4, "state gap convergence", 120.0, [&] { return c4_convergence(plants, results); }},
      {5, "SISE divergence vs stability", 30.0, c5_sise_exhibit},
      {6, "unbiasedness", 300.0, c6_unbiased},
      {7, "high-D filter equivalence", 60.0, c7_equivalence},
      {8, "statistics recovery", 60.0, c8_stats},
      {9, "return difference equality", 5.0, [&] { return c9_return_difference(plants); }},
      {10, "Tustin suite", 10.0, c10_tustin},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = o.pass && secs < c.budget_s;
    failures += !ok;
    std::printf("criterion %2d %s: %s | %s | %.2f s (budget %.0f s)\n", c.id, ok ? "PASS" : "FAIL",
                c.name, o.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
