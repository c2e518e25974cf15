#include "ioest/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "ioest/highd.hpp"
#include "ioest/kernels.hpp"
#include "ioest/matrixeq.hpp"
#include "ioest/sise.hpp"

namespace ioest {
namespace {

class Normals {
 public:
  explicit Normals(std::uint64_t seed) : engine_(seed) {}
  Vector draw(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = dist_(engine_);
    return v;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_;
};

Matrix or_identity(const Matrix& M, Eigen::Index n) {
  return M.size() == 0 ? Matrix(Matrix::Identity(n, n)) : M;
}

Matrix ar_coeff(const InputModel& dm, std::size_t k, Eigen::Index m) {
  if (dm.ar_coeffs.empty()) return k == 0 ? Matrix(0.8 * Matrix::Identity(m, m)) : Matrix::Zero(m, m);
  return dm.ar_coeffs[k];
}

std::size_t ar_order(const InputModel& dm) {
  return dm.ar_coeffs.empty() ? 1 : dm.ar_coeffs.size();
}

}  // namespace

InputModel InputModel::white(Matrix cov) {
  InputModel d;
  d.kind = InputModelKind::White;
  d.cov = std::move(cov);
  return d;
}

InputModel InputModel::ar(std::vector<Matrix> coeffs, Matrix cov) {
  InputModel d;
  d.kind = InputModelKind::AR;
  d.ar_coeffs = std::move(coeffs);
  d.cov = std::move(cov);
  return d;
}

InputModel InputModel::deterministic(std::vector<Vector> sequence) {
  InputModel d;
  d.kind = InputModelKind::Deterministic;
  d.sequence = std::move(sequence);
  return d;
}

StateSpaceModel ScenarioConfig::effective_plant() const {
  StateSpaceModel P = plant;
  if (Q.size() > 0) P.Q_proc = Q;
  if (R.size() > 0) P.R_meas = R;
  return P;
}

int ScenarioConfig::effective_burn_in() const {
  return burn_in < 0 ? 10 * plant.n() : burn_in;
}

void ScenarioConfig::validate() const {
  const StateSpaceModel P = effective_plant();
  P.validate();
  if (!P.is_discrete()) throw Error(ErrorCode::InvalidArgument, "scenario plant must be discrete");
  if (horizon < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be positive");
  if (horizon <= effective_burn_in()) throw Error(ErrorCode::InvalidArgument, "horizon must exceed burn_in");
  if (trials < 0) throw Error(ErrorCode::InvalidArgument, "trials must be nonnegative");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
  const auto m = P.m();
  if (d_model.cov.size() > 0 && (d_model.cov.rows() != m || d_model.cov.cols() != m)) {
    throw Error(ErrorCode::DimensionMismatch, "input covariance must be m x m");
  }
  for (const Matrix& a : d_model.ar_coeffs) {
    if (a.rows() != m || a.cols() != m) throw Error(ErrorCode::DimensionMismatch, "AR coefficient must be m x m");
  }
  for (const Vector& v : d_model.sequence) {
    if (v.size() != m) throw Error(ErrorCode::DimensionMismatch, "input sequence entry must have m entries");
  }
}

PlantTrajectories simulate_plant(const ScenarioConfig& config, int trial) {
  config.validate();
  const StateSpaceModel P = config.effective_plant();
  const auto n = P.n();
  const auto m = P.m();
  const auto p = P.p();
  const int T = config.horizon;
  const InputModel& dm = config.d_model;
  const Matrix Lw = psd_sqrt(P.Q_proc);
  const Matrix Lv = psd_sqrt(P.R_meas);
  const Matrix Ld = psd_sqrt(or_identity(dm.cov, m));

  Normals rng(config.seed + static_cast<std::uint64_t>(trial));
  PlantTrajectories tr;
  for (auto* s : {&tr.x, &tr.d, &tr.w, &tr.v, &tr.y}) s->reserve(static_cast<std::size_t>(T) + 1);

  Vector x = config.x0_scale * rng.draw(n);
  for (int t = 0; t <= T; ++t) {
    Vector d = Vector::Zero(m);
    switch (dm.kind) {
      case InputModelKind::White:
        d = Ld * rng.draw(m);
        break;
      case InputModelKind::AR:
        d = Ld * rng.draw(m);
        for (std::size_t k = 0; k < ar_order(dm); ++k) {
          if (static_cast<std::size_t>(t) > k) d += ar_coeff(dm, k, m) * tr.d[t - 1 - k];
        }
        break;
      case InputModelKind::Deterministic:
        if (static_cast<std::size_t>(t) < dm.sequence.size()) d = dm.sequence[t];
        break;
    }
    Vector w = Lw * rng.draw(n);
    Vector v = Lv * rng.draw(p);
    tr.y.push_back(P.C * x + P.H * d + v);
    tr.x.push_back(x);
    x = P.A * x + P.G * d + w;
    tr.d.push_back(std::move(d));
    tr.w.push_back(std::move(w));
    tr.v.push_back(std::move(v));
  }
  return tr;
}

FactoredTrajectories simulate_factored(const ScenarioConfig& config,
                                       const FactorizationResult& fr, int trial) {
  FactoredTrajectories out;
  out.plant = simulate_plant(config, trial);
  const StateSpaceModel& Po = fr.P_outer;
  const StateSpaceModel& Pi = fr.P_inner;
  const StateSpaceModel P = config.effective_plant();
  if (Po.n() != P.n() || Po.p() != P.p() || Pi.m() != P.m() || Pi.p() != Po.m()) {
    throw Error(ErrorCode::DimensionMismatch, "factors do not match the plant");
  }
  const int T = config.horizon;
  Vector xi = Vector::Zero(Pi.n());
  if (config.inner_x0_scale > 0.0 && Pi.n() > 0) {
    Normals rng((config.seed + static_cast<std::uint64_t>(trial)) ^ kInnerStream);
    xi = config.inner_x0_scale * rng.draw(Pi.n());
  }
  Vector xo = Vector::Zero(Po.n());
  for (auto* s : {&out.x_i, &out.x_o, &out.f, &out.y}) s->reserve(static_cast<std::size_t>(T) + 1);
  for (int t = 0; t <= T; ++t) {
    const Vector& d = out.plant.d[t];
    Vector f = Pi.C * xi + Pi.H * d;
    out.y.push_back(Po.C * xo + Po.H * f + out.plant.v[t]);
    out.x_i.push_back(xi);
    out.x_o.push_back(xo);
    xi = Pi.A * xi + Pi.G * d;
    xo = Po.A * xo + Po.G * f + out.plant.w[t];
    out.f.push_back(std::move(f));
  }
  return out;
}

CascadeCoupling cascade_coupling(const StateSpaceModel& P, const FactorizationResult& fr) {
  const StateSpaceModel& Po = fr.P_outer;
  const StateSpaceModel& Pi = fr.P_inner;
  const auto n = P.n();
  const auto l = Pi.n();
  CascadeCoupling c;
  c.T = Matrix::Zero(n, l);
  if (l > 0) {
    const Matrix K = Eigen::kroneckerProduct(Matrix::Identity(l, l), P.A) -
                     Eigen::kroneckerProduct(Pi.A.transpose(), Matrix::Identity(n, n));
    const Matrix rhs = Po.G * Pi.C;
    const Vector vecT = K.fullPivLu().solve(Eigen::Map<const Vector>(rhs.data(), rhs.size()));
    c.T = Eigen::Map<const Matrix>(vecT.data(), n, l);
  }
  c.residual = (P.G - Po.G * Pi.H - c.T * Pi.G).norm() / (1.0 + P.G.norm());
  return c;
}

double fit_convergence_rate(const std::vector<double>& e) {
  if (e.empty()) throw Error(ErrorCode::CurveTooFlat, "empty error curve");
  const auto peak_it = std::max_element(e.begin(), e.end());
  const double peak = *peak_it;
  if (!std::isfinite(peak)) throw Error(ErrorCode::InvalidArgument, "error curve is not finite");
  const double floor = 100.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, peak);
  std::size_t begin = static_cast<std::size_t>(peak_it - e.begin());
  std::size_t end = begin;
  while (end < e.size() && e[end] > floor) ++end;
  if (end - begin < 20) {
    throw Error(ErrorCode::CurveTooFlat, "only " + std::to_string(end - begin) +
                                             " points above the noise floor");
  }
  // Ordinary least squares of log e against t.
  const double N = static_cast<double>(end - begin);
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t k = begin; k < end; ++k) {
    const double t = static_cast<double>(k);
    const double y = std::log(e[k]);
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  const double slope = (N * sty - st * sy) / (N * stt - st * st);
  return std::exp(slope);
}

namespace {

struct Shared {
  StateSpaceModel P;
  FactorizationResult fr;
  CascadeCoupling coupling;
  bool sise_p_applicable = false;
  std::optional<KalmanSteadyState> kf;
  std::string kf_error;
};

TrialReport run_trial(const ScenarioConfig& cfg, const Shared& sh, int trial) {
  TrialReport r;
  r.trial = trial;
  const StateSpaceModel& P = sh.P;
  const auto n = P.n();
  const int T = cfg.horizon;
  try {
    FactoredTrajectories tr = simulate_factored(cfg, sh.fr, trial);
    const auto& x = tr.plant.x;
    r.gap_curve.reserve(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) r.gap_curve.push_back((x[t] - tr.x_o[t]).norm());
    try {
      r.gap_rate = fit_convergence_rate(r.gap_curve);
    } catch (const Error&) {
    }

    const std::vector<Vector> meas(tr.plant.y.begin() + 1, tr.plant.y.end());
    SiseRunOptions ro;
    ro.overflow_guard = cfg.divergence_guard;
    const Matrix P0 = cfg.x0_scale * cfg.x0_scale * Matrix::Identity(n, n) +
                      cfg.inner_x0_scale * cfg.inner_x0_scale * sh.coupling.T * sh.coupling.T.transpose();

    const auto stage = [&r](const char* name, auto&& body) {
      try {
        body();
      } catch (const Error& e) {
        r.stage_errors.push_back(std::string(name) + ": " + std::string(to_string(e.code())) + ": " + e.what());
      }
    };

    if (sh.sise_p_applicable) {
      stage("sise on P", [&] {
        const SiseRunReport rp = run_sise(sise_init(P, Vector::Zero(n), P0), meas, ro);
        r.sise_p_ran = true;
        r.sise_p_diverged = rp.diverged;
        r.sise_p_onset = rp.divergence_onset;
      });
    }

    SiseRunReport ro_po;
    stage("sise on Po", [&] {
      StateSpaceModel Po = sh.fr.P_outer;
      Po.Q_proc = P.Q_proc;
      Po.R_meas = P.R_meas;
      ro_po = run_sise(sise_init(Po, Vector::Zero(n), P0), meas, ro);
      r.sise_po_ran = true;
    });
    if (r.sise_po_ran) {
      r.sise_po_diverged = ro_po.diverged;
      if (!ro_po.P_trace.empty()) {
        const std::size_t last = ro_po.P_trace.size() - 1;
        r.sise_po_trace_final = ro_po.P_trace[last];
        if (last >= 100) {
          r.sise_po_trace_change =
              std::abs(ro_po.P_trace[last] - ro_po.P_trace[last - 100]) / std::abs(ro_po.P_trace[last]);
        }
      }
      if (cfg.probe_time >= 1 && cfg.probe_time <= T) {
        const int t = cfg.probe_time;
        r.probe_error = ro_po.x_hat[t - 1] - (x[t] - sh.coupling.T * tr.x_i[t]);
      }
    }

    std::vector<Vector> x_kf;
    if (sh.kf) {
      stage("high-D filter", [&] {
        KalmanFilterState kf = kf_highd_init_steady(P, *sh.kf, Vector::Zero(n));
        x_kf.reserve(tr.plant.y.size());
        for (const Vector& y : tr.plant.y) x_kf.push_back(kf_highd_step(kf, y).x_filt);
      });
    } else {
      r.stage_errors.push_back("high-D filter: " + sh.kf_error);
    }
    if (r.sise_po_ran && x_kf.size() == tr.plant.y.size()) {
      double diff2 = 0.0, x2 = 0.0;
      int count = 0;
      for (int k = T / 2; k < T; ++k) {
        diff2 += (x_kf[k + 1] - ro_po.x_hat[k]).squaredNorm();
        x2 += x[k + 1].squaredNorm();
        ++count;
      }
      if (count > 0) {
        r.kf_rms_diff = std::sqrt(diff2 / count);
        r.rms_x = std::sqrt(x2 / count);
      }
    }

    if (cfg.keep_trajectories) {
      r.traj = std::move(tr);
      r.x_hat_po = ro_po.x_hat;
      r.f_hat = ro_po.d_hat;
      r.x_hat_kf = std::move(x_kf);
    } else if (trial == 0) {
      r.f_hat = ro_po.d_hat;
    }
  } catch (const Error& e) {
    r.error = std::string(to_string(e.code())) + ": " + e.what();
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

StatsRecovery recover_stats(const ScenarioConfig& cfg, const Shared& sh, const TrialReport& t0) {
  StatsRecovery s;
  if (cfg.d_model.kind == InputModelKind::Deterministic || !t0.error.empty()) return s;
  const auto m = sh.P.m();
  const int burn = cfg.effective_burn_in();
  if (static_cast<int>(t0.f_hat.size()) <= burn) return s;
  const std::vector<Vector> f(t0.f_hat.begin() + burn, t0.f_hat.end());
  SignalStats est;
  try {
    est = estimate_stats(f);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::TooFewSamples) return s;
    throw;
  }
  s.ran = true;
  s.recovered = recover_d_stats(est, sh.fr.P_inner);

  SignalStats truth;
  truth.mean = Vector::Zero(m);
  truth.omegas = est.omegas;
  const Matrix cov = or_identity(cfg.d_model.cov, m);
  std::vector<Matrix> coeffs;
  if (cfg.d_model.kind == InputModelKind::AR) {
    for (std::size_t k = 0; k < ar_order(cfg.d_model); ++k) coeffs.push_back(ar_coeff(cfg.d_model, k, m));
  }
  for (double w : truth.omegas) truth.psd.push_back(ar_spectrum(coeffs, cov, w));
  truth.autocov = autocov_from_psd(truth.omegas, truth.psd, static_cast<int>(est.autocov.size()) - 1);

  double sum2 = 0.0;
  int count = 0;
  for (std::size_t k = 1; k + 1 < truth.omegas.size(); ++k) {
    const double rel = (s.recovered.psd[k] - truth.psd[k]).norm() / truth.psd[k].norm();
    sum2 += rel * rel;
    s.rel_max = std::max(s.rel_max, rel);
    ++count;
  }
  s.rel_rms = count > 0 ? std::sqrt(sum2 / count) : 0.0;

  const SignalStats rt = recover_d_stats(push_through_inner(truth, sh.fr.P_inner), sh.fr.P_inner);
  for (std::size_t k = 0; k < truth.omegas.size(); ++k) {
    s.round_trip = std::max(s.round_trip, (rt.psd[k] - truth.psd[k]).norm());
  }
  return s;
}

}  // namespace

ExperimentReport run_experiment(const ScenarioConfig& cfg,
                                const std::optional<FactorizationResult>& factors) {
  cfg.validate();
  Shared sh;
  sh.P = cfg.effective_plant();
  sh.fr = factors ? *factors : factorize_discrete(sh.P, cfg.factor_options);
  sh.coupling = cascade_coupling(sh.P, sh.fr);
  const bool h_zero = sh.P.H.norm() <= 1e-12 * (1.0 + sh.P.C.norm() * sh.P.G.norm());
  sh.sise_p_applicable = h_zero && numerical_rank(sh.P.C * sh.P.G, 1e-8).rank == sh.P.m();
  try {
    sh.kf = kf_highd_steady(sh.P, Matrix::Identity(sh.P.m(), sh.P.m()) / cfg.epsilon);
  } catch (const Error& e) {
    sh.kf_error = e.what();
  }

  ExperimentReport rep;
  rep.ell = sh.fr.ell;
  rep.shifted = sh.fr.shifted;
  rep.max_eig_A = spectral_radius(sh.P.A);
  rep.max_eig_Ahat = sh.fr.P_inner.n() > 0 ? spectral_radius(sh.fr.P_inner.A) : 0.0;
  rep.coupling_residual = sh.coupling.residual;

  rep.trials = kernels::map<TrialReport>(static_cast<std::size_t>(cfg.trials),
                                         [&](std::size_t k) { return run_trial(cfg, sh, static_cast<int>(k)); });

  const auto n = sh.P.n();
  Vector sum = Vector::Zero(n), sum2 = Vector::Zero(n);
  int probes = 0;
  for (const TrialReport& t : rep.trials) {
    if (!t.error.empty()) continue;
    ++rep.completed;
    rep.sise_p_divergences += t.sise_p_diverged ? 1 : 0;
    rep.sise_po_divergences += t.sise_po_diverged ? 1 : 0;
    if (t.probe_error.size() == n) {
      sum += t.probe_error;
      sum2 += t.probe_error.cwiseAbs2();
      ++probes;
    }
    if (rep.mean_gap_curve.empty()) rep.mean_gap_curve.assign(t.gap_curve.size(), 0.0);
    for (std::size_t k = 0; k < t.gap_curve.size(); ++k) rep.mean_gap_curve[k] += t.gap_curve[k];
    if (t.rms_x > 0.0) rep.kf_equivalence_worst = std::max(rep.kf_equivalence_worst, t.kf_rms_diff / t.rms_x);
  }
  if (rep.completed > 0) {
    for (double& g : rep.mean_gap_curve) g /= rep.completed;
    try {
      rep.gap_rate = fit_convergence_rate(rep.mean_gap_curve);
    } catch (const Error&) {
    }
  }
  if (probes > 0) {
    rep.probe_mean = sum / probes;
    if (probes > 1) {
      const Vector var = (sum2 - probes * rep.probe_mean.cwiseAbs2()) / (probes - 1);
      rep.probe_stderr = (var.cwiseMax(0.0) / probes).cwiseSqrt();
    } else {
      rep.probe_stderr = Vector::Zero(n);
    }
  }
  if (!rep.trials.empty()) {
    rep.stats = recover_stats(cfg, sh, rep.trials.front());
    if (!cfg.keep_trajectories) rep.trials.front().f_hat.clear();
  }
  return rep;
}

}  // namespace ioest
