#include "ioest/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>

#include <CLI11.hpp>

#include "ioest/highd.hpp"
#include "ioest/innerouter.hpp"
#include "ioest/inputstats.hpp"
#include "ioest/io.hpp"
#include "ioest/simharness.hpp"
#include "ioest/sise.hpp"

namespace ioest::cli {

namespace fs = std::filesystem;
using io::Json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::GridMismatch:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::InvalidArgument:
      return kUsage;
    case ErrorCode::NotRegular:
    case ErrorCode::NotStable:
    case ErrorCode::NotMinimal:
    case ErrorCode::UnstableA:
    case ErrorCode::PoleAtMinusOne:
    case ErrorCode::PoleAtOmega0:
    case ErrorCode::NotDetectable:
    case ErrorCode::NotStabilizable:
    case ErrorCode::SingularFeedthrough:
    case ErrorCode::AssumptionHNotZero:
    case ErrorCode::RankAmbiguous:
    case ErrorCode::RankDecisionAmbiguous:
    case ErrorCode::TooFewSamples:
    case ErrorCode::NearPole:
    case ErrorCode::CurveTooFlat:
      return kPrecondition;
    case ErrorCode::RankCGDeficient:
      return kRankCG;
    default:
      return kVerification;
  }
}

namespace {

struct Flags {
  int grid_points = 256;
  double tol = kRankTol;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir = ".";
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void report_error(std::ostream& err, std::string_view code, int exit, const std::string& reason) {
  err << "error=" << code << " exit=" << exit << " reason=" << one_line(reason) << "\n";
}

void write_json(const fs::path& path, const Json& j) { io::save_text(path, j.dump(2) + "\n"); }

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json checks_json(const FactorizationChecks& c) {
  Json j;
  j["innerness"] = c.innerness;
  j["product"] = c.product;
  j["product_scale"] = c.product_scale;
  j["outer_min_sv"] = c.outer_min_sv;
  j["ell_rank"] = c.ell_rank;
  j["inner_pole_count"] = c.inner_pole_count;
  j["inner_pole_radius"] = c.inner_pole_radius;
  j["innerness_ok"] = c.innerness_ok;
  j["product_ok"] = c.product_ok;
  j["outerness_ok"] = c.outerness_ok;
  j["ell_ok"] = c.ell_ok;
  j["inner_poles_ok"] = c.inner_poles_ok;
  j["pass"] = c.pass();
  return j;
}

int cmd_factorize(const std::string& input, const Flags& fl, std::ostream& out) {
  const io::SystemFile sf = io::load_system(input);
  DiscreteFactorOptions opt;
  opt.tol = fl.tol;
  opt.grid_points = fl.grid_points;
  FactorizationResult r;
  if (sf.sys.is_discrete()) {
    r = factorize_discrete(sf.sys, opt);
  } else {
    r = green_factorize_estimation(sf.sys, fl.tol);
  }
  const fs::path dir = fl.out_dir;
  io::save_system(dir / "outer.json", r.P_outer, Json{{"role", "outer"}, {"source", input}});
  io::save_system(dir / "inner.json", r.P_inner, Json{{"role", "inner"}, {"source", input}});
  Json s;
  s["ell"] = r.ell;
  if (r.ell == 0) s["note"] = "already outer";
  s["shifted"] = r.shifted;
  s["shift_residual"] = r.shift_residual;
  s["delta_P"] = r.regularity.macmillan_deg_P;
  s["delta_PPsim"] = r.regularity.macmillan_deg_PPsim;
  s["gap_ratio"] = r.green.gap_ratio;
  s["step6_residual"] = r.green.step6_residual;
  s["checks"] = checks_json(r.checks);
  write_json(dir / "factorize_summary.json", s);

  out << "ell=" << r.ell << (r.ell == 0 ? " (already outer)" : "") << " shifted=" << r.shifted
      << " innerness=" << io::format_number(r.checks.innerness)
      << " product=" << io::format_number(r.checks.product)
      << " outer_min_sv=" << io::format_number(r.checks.outer_min_sv)
      << " pass=" << (r.checks.pass() ? "true" : "false") << "\n";
  if (!r.checks.pass()) {
    throw Error(ErrorCode::VerificationFailed, "factorization invariants failed (see factorize_summary.json)");
  }
  return kOk;
}

int cmd_estimate(const std::string& system, const std::string& meas_path, const std::string& method,
                 double p0, const Flags& fl, std::ostream& out) {
  const StateSpaceModel sys = io::load_system(system).sys;
  const io::CsvTable meas = io::load_csv(meas_path);
  if (!meas.rows.empty() && static_cast<int>(meas.header.size()) != sys.p()) {
    throw Error(ErrorCode::DimensionMismatch, "measurement file has " + std::to_string(meas.header.size()) +
                                                  " columns, system has p = " + std::to_string(sys.p()));
  }
  const std::vector<Vector> ys = io::rows_as_vectors(meas);
  const auto n = sys.n();
  const Matrix P0 = p0 * Matrix::Identity(n, n);
  io::CsvTable table;
  Json s;
  s["method"] = method;
  s["steps"] = ys.size();

  if (method == "sise") {
    const SiseRunReport rep = run_sise(sise_init(sys, Vector::Zero(n), P0), ys);
    table.header = io::indexed_names("x_hat", n);
    for (const auto& h : io::indexed_names("d_hat", sys.m())) table.header.push_back(h);
    table.header.push_back("P_trace");
    for (std::size_t k = 0; k < ys.size(); ++k) {
      std::vector<double> row(rep.x_hat[k].data(), rep.x_hat[k].data() + n);
      row.insert(row.end(), rep.d_hat[k].data(), rep.d_hat[k].data() + sys.m());
      row.push_back(rep.P_trace[k]);
      table.rows.push_back(std::move(row));
    }
    s["diverged"] = rep.diverged;
    s["divergence_onset"] = rep.divergence_onset;
    s["ill_conditioned_cg"] = rep.ill_conditioned_cg;
  } else if (method == "highd") {
    const Matrix D = Matrix::Identity(sys.m(), sys.m()) / fl.epsilon;
    // Rows are y_1, y_2, ... as for SISE: start from x_{0|0} = 0, cov(x_{0|0}) = P0.
    KalmanFilterState kf = kf_highd_init(sys, D, Vector::Zero(n), P0);
    kf.P_pred = sym(sys.A * P0 * sys.A.transpose() + kf.Q_total);
    table.header = io::indexed_names("x_hat", n);
    table.header.push_back("P_trace");
    for (const Vector& y : ys) {
      const KalmanStepOutput o = kf_highd_step(kf, y);
      std::vector<double> row(o.x_filt.data(), o.x_filt.data() + n);
      row.push_back(o.P_filt.trace());
      table.rows.push_back(std::move(row));
    }
    s["epsilon"] = fl.epsilon;
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown method '" + method + "' (expected sise or highd)");
  }
  const fs::path dir = fl.out_dir;
  io::save_text(dir / "estimate.csv", io::to_csv(table));
  write_json(dir / "estimate_summary.json", s);
  out << "method=" << method << " steps=" << ys.size();
  if (s.contains("diverged")) out << " diverged=" << (s["diverged"].get<bool>() ? "true" : "false");
  out << "\n";
  return kOk;
}

int cmd_experiment(const std::string& scenario, const Flags& fl, std::ostream& out) {
  ScenarioConfig cfg = io::load_scenario(scenario);
  if (fl.seed_given) cfg.seed = fl.seed;
  cfg.factor_options.tol = fl.tol;
  cfg.factor_options.grid_points = fl.grid_points;
  const ExperimentReport rep = run_experiment(cfg);

  Json s;
  s["seed"] = cfg.seed;
  s["trials"] = cfg.trials;
  s["completed"] = rep.completed;
  s["ell"] = rep.ell;
  s["shifted"] = rep.shifted;
  s["max_eig_A"] = rep.max_eig_A;
  s["max_eig_Ahat"] = rep.max_eig_Ahat;
  s["coupling_residual"] = rep.coupling_residual;
  s["sise_on_P_diverged"] = rep.sise_p_divergences;
  s["sise_on_Po_diverged"] = rep.sise_po_divergences;
  s["gap_rate"] = rep.gap_rate ? Json(*rep.gap_rate) : Json();
  s["rate_bound"] = std::max(rep.max_eig_A, rep.max_eig_Ahat);
  s["kf_equivalence_worst"] = rep.kf_equivalence_worst;
  s["probe_mean"] = vector_json(rep.probe_mean);
  s["probe_stderr"] = vector_json(rep.probe_stderr);
  if (rep.stats.ran) {
    s["stats_rel_rms"] = rep.stats.rel_rms;
    s["stats_rel_max"] = rep.stats.rel_max;
    s["stats_round_trip"] = rep.stats.round_trip;
  }
  Json errors = Json::array();
  for (const TrialReport& t : rep.trials) {
    if (!t.error.empty()) errors.push_back({{"trial", t.trial}, {"error", t.error}});
    for (const std::string& e : t.stage_errors) errors.push_back({{"trial", t.trial}, {"error", e}});
  }
  s["trial_errors"] = errors;

  const fs::path dir = fl.out_dir;
  write_json(dir / "experiment_summary.json", s);
  io::CsvTable gap;
  gap.header = {"t", "mean_gap"};
  for (std::size_t t = 0; t < rep.mean_gap_curve.size(); ++t) {
    gap.rows.push_back({static_cast<double>(t), rep.mean_gap_curve[t]});
  }
  io::save_text(dir / "experiment_gap.csv", io::to_csv(gap));

  out << "trials=" << rep.completed << "/" << cfg.trials << " ell=" << rep.ell
      << " sise_on_P_diverged=" << rep.sise_p_divergences
      << " sise_on_Po_diverged=" << rep.sise_po_divergences;
  if (rep.gap_rate) out << " gap_rate=" << io::format_number(*rep.gap_rate);
  out << "\n";
  return kOk;
}

int cmd_stats(const std::string& fhat, const std::string& inner, int tau_max, int burn_in,
              int grid_points, const Flags& fl, std::ostream& out) {
  const StateSpaceModel Pi = io::load_system(inner).sys;
  const io::CsvTable table = io::load_csv(fhat);
  if (static_cast<int>(table.header.size()) != Pi.m()) {
    throw Error(ErrorCode::GridMismatch, "f-hat file has " + std::to_string(table.header.size()) +
                                             " columns, inner factor has m = " + std::to_string(Pi.m()));
  }
  std::vector<Vector> f = io::rows_as_vectors(table);
  if (burn_in > 0) f.erase(f.begin(), f.begin() + std::min<std::size_t>(f.size(), burn_in));
  StatsOptions so;
  so.tau_max = tau_max;
  so.grid_points = grid_points;
  const SignalStats fs_ = estimate_stats(f, so);
  const SignalStats ds = recover_d_stats(fs_, Pi);

  Json s;
  s["samples"] = f.size();
  s["f_mean"] = vector_json(fs_.mean);
  s["d_mean"] = vector_json(ds.mean);
  Json ac = Json::array();
  for (const Matrix& R : ds.autocov) ac.push_back(io::matrix_to_json(R));
  s["d_autocov"] = ac;
  const fs::path dir = fl.out_dir;
  write_json(dir / "d_stats.json", s);

  io::CsvTable psd;
  psd.header = {"omega"};
  const int m = Pi.m();
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k) {
      const std::string idx = "[" + std::to_string(i) + "," + std::to_string(k) + "]";
      psd.header.push_back("Phi_dd_re" + idx);
      psd.header.push_back("Phi_dd_im" + idx);
    }
  }
  for (std::size_t w = 0; w < ds.omegas.size(); ++w) {
    std::vector<double> row{ds.omegas[w]};
    for (int i = 0; i < m; ++i) {
      for (int k = 0; k < m; ++k) {
        row.push_back(ds.psd[w](i, k).real());
        row.push_back(ds.psd[w](i, k).imag());
      }
    }
    psd.rows.push_back(std::move(row));
  }
  io::save_text(dir / "d_psd.csv", io::to_csv(psd));
  out << "samples=" << f.size() << " grid_points=" << ds.omegas.size() << "\n";
  return kOk;
}

int cmd_verify(const std::string& system, const std::string& outer, const std::string& inner,
               bool is_inner, const Flags& fl, std::ostream& out) {
  const StateSpaceModel sys = io::load_system(system).sys;
  Json s;
  bool ok = true;
  s["stable"] = sys.is_stable();
  const MinimalityReport mr = reachability_observability_check(sys, fl.tol);
  s["minimal"] = mr.minimal;
  try {
    const RegularityReport rr = regularity_check(sys, fl.tol);
    s["delta_P"] = rr.macmillan_deg_P;
    s["delta_PPsim"] = rr.macmillan_deg_PPsim;
    s["regular"] = rr.regular;
    s["gap_ratio_P"] = rr.gap_ratio_P;
    s["gap_ratio_PPsim"] = rr.gap_ratio_PPsim;
  } catch (const Error& e) {
    s["regularity_error"] = std::string(to_string(e.code())) + ": " + e.what();
  }
  if (sys.p() == sys.m()) {
    const InnerReport ir = verify_inner(sys, FrequencyGrid::verification(sys.domain, fl.grid_points));
    s["inner_residual"] = ir.max_residual;
    s["is_inner"] = ir.pass;
    if (is_inner && !ir.pass) ok = false;
  } else if (is_inner) {
    ok = false;
  }
  if (!outer.empty() || !inner.empty()) {
    if (outer.empty() || inner.empty()) {
      throw Error(ErrorCode::InvalidArgument, "--outer and --inner must be given together");
    }
    const StateSpaceModel Po = io::load_system(outer).sys;
    const StateSpaceModel Pi = io::load_system(inner).sys;
    const FactorizationChecks c = check_factorization(sys, Po, Pi, Pi.n(), fl.grid_points);
    s["factorization"] = checks_json(c);
    ok = ok && c.pass();
  }
  s["pass"] = ok;
  write_json(fs::path(fl.out_dir) / "verify_summary.json", s);
  out << s.dump() << "\n";
  if (!ok) throw Error(ErrorCode::VerificationFailed, "verification failed (see verify_summary.json)");
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stable simultaneous input and state estimation tools", "ioest"};
  app.require_subcommand(1);
  Flags fl;
  app.add_option("--grid-points", fl.grid_points, "Frequency grid size for checks")->check(CLI::PositiveNumber);
  app.add_option("--tol", fl.tol, "Relative rank tolerance")->check(CLI::PositiveNumber);
  app.add_option("--epsilon", fl.epsilon, "High-D filter uses D = I / epsilon")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", fl.seed, "Override the scenario seed");
  app.add_option("--out-dir", fl.out_dir, "Directory for output files");

  std::string a1, a2, method = "sise", outer, inner;
  double p0 = 1.0;
  int tau_max = 128, burn_in = 0, psd_points = 512;
  bool is_inner = false;

  auto* fac = app.add_subcommand("factorize", "Inner-outer factorization of a system file");
  fac->add_option("system", a1, "System file")->required();
  auto* est = app.add_subcommand("estimate", "Run SISE or the high-D Kalman filter on measurements");
  est->add_option("system", a1, "System file")->required();
  est->add_option("measurements", a2, "CSV of y_1, y_2, ... (one column per output)")->required();
  est->add_option("--method", method, "sise or highd")->check(CLI::IsMember({"sise", "highd"}));
  est->add_option("--p0", p0, "Initial covariance P0 = p0 I");
  auto* exp = app.add_subcommand("experiment", "Monte-Carlo experiment from a scenario file");
  exp->add_option("scenario", a1, "Scenario file")->required();
  auto* sta = app.add_subcommand("stats", "Recover unknown-input statistics from f-hat samples");
  sta->add_option("fhat", a1, "CSV of f-hat samples")->required();
  sta->add_option("inner", a2, "Inner factor system file")->required();
  sta->add_option("--tau-max", tau_max, "Largest autocovariance lag");
  sta->add_option("--burn-in", burn_in, "Samples discarded before estimation");
  sta->add_option("--psd-points", psd_points, "PSD grid size on [0, pi]");
  auto* ver = app.add_subcommand("verify", "Structural checks and factorization verification");
  ver->add_option("system", a1, "System file")->required();
  ver->add_option("--outer", outer, "Outer factor file");
  ver->add_option("--inner", inner, "Inner factor file");
  ver->add_flag("--is-inner", is_inner, "Fail unless the system is inner");
  for (auto* sub : {fac, est, exp, sta, ver}) sub->fallthrough();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "ParseError", kUsage, e.what());
    return kUsage;
  }
  fl.seed_given = seed_opt->count() > 0;

  try {
    if (*fac) return cmd_factorize(a1, fl, out);
    if (*est) return cmd_estimate(a1, a2, method, p0, fl, out);
    if (*exp) return cmd_experiment(a1, fl, out);
    if (*sta) return cmd_stats(a1, a2, tau_max, burn_in, psd_points, fl, out);
    if (*ver) return cmd_verify(a1, outer, inner, is_inner, fl, out);
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    report_error(err, to_string(e.code()), code, e.what());
    return code;
  } catch (const std::exception& e) {
    report_error(err, "Internal", kVerification, e.what());
    return kVerification;
  }
  return kUsage;
}

}  // namespace ioest::cli
