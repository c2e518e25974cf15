#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ioest/innerouter.hpp"
#include "ioest/inputstats.hpp"
#include "ioest/statespace.hpp"

namespace ioest {

enum class InputModelKind { White, AR, Deterministic };

/// Unknown-input process. White: d_t ~ N(0, cov). AR: d_t = sum_k a_k d_{t-k} + e_t,
/// e_t ~ N(0, cov), started from zero. Deterministic: d_t = sequence[t], zero
/// past the end of the sequence.
struct InputModel {
  InputModelKind kind = InputModelKind::AR;
  Matrix cov;                   ///< empty means identity
  std::vector<Matrix> ar_coeffs;  ///< empty means 0.8 I
  std::vector<Vector> sequence;

  static InputModel white(Matrix cov = {});
  static InputModel ar(std::vector<Matrix> coeffs, Matrix cov = {});
  static InputModel deterministic(std::vector<Vector> sequence);
  static InputModel zero() { return deterministic({}); }
};

inline constexpr std::uint64_t kInnerStream = 0x9e3779b97f4a7c15ULL;

struct ScenarioConfig {
  StateSpaceModel plant;
  InputModel d_model;
  int horizon = 1000;
  std::uint64_t seed = 1;
  /// Override the plant's covariances when non-empty.
  Matrix Q;
  Matrix R;
  int burn_in = -1;  ///< negative means 10 n
  int trials = 1;
  double x0_scale = 5.0;
  /// Scale of a random inner-factor initial state; 0 keeps x^i_0 = 0.
  double inner_x0_scale = 0.0;
  /// High-D filter: D = I / epsilon.
  double epsilon = 1e-8;
  double divergence_guard = 1e12;
  /// Index at which the per-trial SISE-on-Po state error is recorded.
  int probe_time = 200;
  bool keep_trajectories = false;
  DiscreteFactorOptions factor_options;

  /// Plant with the override covariances applied.
  StateSpaceModel effective_plant() const;
  int effective_burn_in() const;
  /// Throws InvalidArgument on inconsistent settings.
  void validate() const;
};

/// Trajectories of the plant, every sequence indexed t = 0..T (w_T only feeds
/// x_{T+1}, which is not formed).
struct PlantTrajectories {
  std::vector<Vector> x, d, w, v, y;
};

/// Trajectories of the factored system P = Po Pi driven by the same d, w and v.
/// Sequences are indexed t = 0..T; x^o_0 = 0.
struct FactoredTrajectories {
  PlantTrajectories plant;
  std::vector<Vector> x_i, x_o, f, y;
};

/// Seeded draws in a fixed order: x0 (n), then per step d-innovation (m), w (n),
/// v (p). Normals come from std::normal_distribution over std::mt19937_64
/// seeded with seed + trial. x^i_0 uses a second engine seeded with
/// (seed + trial) ^ kInnerStream so the plant stream does not depend on ell.
PlantTrajectories simulate_plant(const ScenarioConfig& config, int trial = 0);
FactoredTrajectories simulate_factored(const ScenarioConfig& config,
                                       const FactorizationResult& factorization, int trial = 0);

/// T solving A T - T A_i = G_o C_i, so that x^o - x + T x^i evolves as
/// e_{t+1} = A e_t. `residual` measures the companion identity G = G_o D_i + T B_i.
struct CascadeCoupling {
  Matrix T;
  double residual = 0.0;
};
CascadeCoupling cascade_coupling(const StateSpaceModel& plant, const FactorizationResult& factors);

/// alpha such that error ~ alpha^t: least squares of log(error) on the leading
/// window where error > 100 eps max(1, peak). Throws CurveTooFlat when fewer
/// than 20 points qualify.
double fit_convergence_rate(const std::vector<double>& error_curve);

struct TrialReport {
  int trial = 0;
  std::string error;  ///< non-empty when the simulation itself failed
  /// Estimator stages that threw; the remaining stages still ran.
  std::vector<std::string> stage_errors;
  bool sise_p_ran = false;
  bool sise_po_ran = false;
  bool sise_p_diverged = false;
  int sise_p_onset = -1;
  bool sise_po_diverged = false;
  double sise_po_trace_final = 0.0;
  /// |tr P_T - tr P_{T-100}| / tr P_T for SISE on Po.
  double sise_po_trace_change = 0.0;
  /// RMS over the last half of ||x_kf - x_sise_po|| and of ||x||.
  double kf_rms_diff = 0.0;
  double rms_x = 0.0;
  /// ||x_t - x^o_t|| for t = 0..T.
  std::vector<double> gap_curve;
  std::optional<double> gap_rate;
  /// SISE-on-Po estimate minus x_t - T x^i_t at probe_time.
  Vector probe_error;

  // Only with keep_trajectories.
  FactoredTrajectories traj;
  std::vector<Vector> x_hat_po, f_hat, x_hat_kf;
};

struct StatsRecovery {
  bool ran = false;
  double rel_rms = 0.0;  ///< RMS over interior bins of ||Phi_hat - Phi|| / ||Phi||
  double rel_max = 0.0;
  double round_trip = 0.0;  ///< max ||recover(push(Phi)) - Phi|| on the grid
  SignalStats recovered;
};

struct ExperimentReport {
  int ell = 0;
  bool shifted = false;
  double max_eig_A = 0.0;
  double max_eig_Ahat = 0.0;
  double coupling_residual = 0.0;
  std::vector<TrialReport> trials;

  // Aggregates over trials without errors.
  int completed = 0;
  int sise_p_divergences = 0;
  int sise_po_divergences = 0;
  Vector probe_mean;
  Vector probe_stderr;
  std::vector<double> mean_gap_curve;
  std::optional<double> gap_rate;
  double kf_equivalence_worst = 0.0;  ///< max kf_rms_diff / rms_x
  StatsRecovery stats;
};

/// Runs SISE on P (when H = 0 and rank(CG) = m), SISE on Po, the high-D Kalman
/// filter and statistics recovery for every trial. Stage failures are recorded
/// per trial.
ExperimentReport run_experiment(const ScenarioConfig& config,
                                const std::optional<FactorizationResult>& factors = std::nullopt);

}  // namespace ioest
