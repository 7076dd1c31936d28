#include "parahom/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "parahom/correctors.hpp"
#include "parahom/effective.hpp"
#include "parahom/error.hpp"
#include "parahom/ivp.hpp"
#include "parahom/rates.hpp"

namespace parahom {

Check at_most(std::string name, double value, double threshold, std::string note) {
  return {std::move(name), value, threshold, "<=", value <= threshold, std::move(note)};
}

Check at_least(std::string name, double value, double threshold, std::string note) {
  return {std::move(name), value, threshold, ">=", value >= threshold, std::move(note)};
}

ojson to_json(const Check& c) {
  ojson j{{"name", c.name}, {"value", c.value}, {"relation", c.relation}, {"threshold", c.threshold}, {"pass", c.pass}};
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"correctors", "tensor", "sweep-lambda", "rate-l2",
                                              "rate-h1",    "lipschitz", "excess",    "verify"};
  return names;
}

int exit_code_for(ErrorCode code) { return is_numerical(code) ? 3 : 2; }

namespace {

constexpr double kZeroTol = 1e-9;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

ojson grid_json(const CellGrid& g) {
  return {{"d", g.d}, {"n_y", g.n_y}, {"n_s", g.n_s}, {"lambda", g.lambda}};
}

ojson mesh_json(const SpaceTimeMesh& m) { return {{"d", m.d}, {"nx", m.nx}, {"nt", m.nt}, {"T", m.T}}; }

double max_slice_mean(const CorrectorSet& c) {
  double m = 0.0;
  for (const auto& chi : c.chi)
    for (int n = 0; n < c.grid.n_s; ++n) m = std::max(m, std::abs(slice_mean(chi, n)));
  return m;
}

double max_entry(const VectorField& v) {
  double m = 0.0;
  for (const auto& f : v) m = std::max(m, max_abs(f));
  return m;
}

double max_entry(const MatrixField& v) {
  double m = 0.0;
  for (const auto& row : v) m = std::max(m, max_entry(row));
  return m;
}

double relative_distance(const Matrix& a, const Matrix& b) { return frobenius_distance(a, b) / a.norm(); }

Matrix at_origin(const CoefficientField& a) { return a(Point{0.0, 0.0}, 0.0); }

// Everything that depends only on (A, lambda, grid): first and dual
// correctors, flux, second correctors and the quadratic identity.
struct CellSuite {
  CorrectorSet chi;
  EffectiveTensor ahat;
  FluxField flux;
  DualCorrectors dual;
  SecondCorrectorSet chi2;
  Lemma51Residual lemma;
};

CellSuite cell_suite(const CoefficientField& a, double lambda, const CellGrid& g, const SolverTolerances& tol) {
  CellSuite s;
  s.chi = solve_parabolic_corrector(a, lambda, g, tol);
  s.ahat = effective_lambda(a, lambda, s.chi);
  s.flux = compute_flux(a, lambda, s.chi, s.ahat);
  // Identities are judged by the checks, not by the solver's own guard.
  s.dual = solve_dual_correctors(s.flux, s.chi, std::numeric_limits<double>::infinity());
  s.chi2 = solve_second_correctors(a, lambda, s.chi, s.flux, tol);
  s.lemma = lemma51_residual(a, lambda, s.chi, s.chi2, s.ahat.matrix);
  return s;
}

// u_eps and u_0 for a constant coefficient at eps = 1/8 over a short run;
// returns max |u_eps - u_0| / max |u_0| at the final level.
double constant_ivp_gap(const CoefficientField& a, double k, Scheme scheme, const ResolutionPolicy& policy) {
  const ScaleParams scale(0.125, k);
  const auto mesh = resolved_mesh(a.d(), scale, 0.05, policy);
  const SpaceTimeFn zero = [](const Point&, double) { return 0.0; };
  auto osc = oscillating_problem(a, scale, rate_source(a.d()), zero);
  auto hom = homogenized_problem(at_origin(a), rate_source(a.d()), zero);
  for (auto* p : {&osc, &hom}) {
    p->source_steady = true;
    p->boundary_zero = true;
  }
  const auto ue = solve_ivp(osc, mesh, scheme, mesh.nt, 0, policy);
  const auto u0 = solve_homogenized(hom, mesh, scheme, mesh.nt, 0);
  const auto a_end = ue.level(ue.levels() - 1), b_end = u0.level(u0.levels() - 1);
  double gap = 0.0, size = 0.0;
  for (std::size_t i = 0; i < a_end.size(); ++i) {
    gap = std::max(gap, std::abs(a_end[i] - b_end[i]));
    size = std::max(size, std::abs(b_end[i]));
  }
  return gap / size;
}

}  // namespace

std::vector<Check> degenerate_checks(const ExperimentConfig& cfg) {
  std::vector<Check> out;
  const CellGrid g = cfg.grid_policy().grid_for(cfg.harness.lambda);
  const int d = cfg.problem.d;
  const auto tol = cfg.tolerances();
  {
    const auto a = builtin_field("constant", default_params("constant"), d);
    const Matrix A = at_origin(a);
    const auto s = cell_suite(a, g.lambda, g, tol);
    const CellGrid g1 = cfg.grid_policy().grid_for(1.0);
    const auto inf = solve_elliptic_corrector_infty(a, g1, tol);
    const auto zero = solve_elliptic_corrector_zero(a, g1, tol);
    out.push_back(at_most("constant.chi_lambda", max_entry(s.chi.chi), kZeroTol));
    out.push_back(at_most("constant.chi_infinity", max_entry(inf.chi), kZeroTol));
    out.push_back(at_most("constant.chi_zero", max_entry(zero.chi), kZeroTol));
    out.push_back(at_most("constant.chi2", max_entry(s.chi2.chi2), kZeroTol));
    out.push_back(at_most("constant.flux", max_entry(s.flux.b), kZeroTol));
    double phi = max_entry(s.dual.phi_time);
    for (const auto& p : s.dual.phi) phi = std::max(phi, max_entry(p));
    out.push_back(at_most("constant.dual", phi, kZeroTol));
    out.push_back(at_most("constant.ahat_lambda", relative_distance(A, s.ahat.matrix), kZeroTol));
    out.push_back(
        at_most("constant.ahat_infinity", relative_distance(A, effective_infinity(a, g1, tol).matrix), kZeroTol));
    out.push_back(at_most("constant.ahat_zero", relative_distance(A, effective_zero(a, g1, tol).matrix), kZeroTol));
    for (double k : cfg.problem.k)
      out.push_back(at_most("constant.u_eps_equals_u_0.k=" + tag(k), constant_ivp_gap(a, k, cfg.scheme(), cfg.policy()),
                            kZeroTol));
  }
  {
    const auto a = builtin_field("time-only", default_params("time-only"), d);
    const auto chi = solve_parabolic_corrector(a, g.lambda, g, tol);
    out.push_back(at_most("time-only.chi_lambda", max_entry(chi.chi), kZeroTol));
    const Matrix mean = at_origin(time_average(a, g.n_s));
    out.push_back(at_most("time-only.ahat_is_time_average",
                          relative_distance(mean, effective_lambda(a, g.lambda, chi).matrix), kZeroTol));
  }
  return out;
}

std::vector<Check> identity_checks(const ExperimentConfig& cfg, ojson* details) {
  std::vector<Check> out;
  const auto a = cfg.coefficient();
  const double lambda = cfg.harness.lambda;
  const auto tol = cfg.tolerances();
  const CellGrid g = cfg.grid_policy().grid_for(lambda);
  const auto s = cell_suite(a, lambda, g, tol);

  out.push_back(at_most("corrector.mean_zero", max_slice_mean(s.chi), kZeroTol));
  const double cert = ellipticity_certificate(s.ahat.matrix, cfg.harness.seed);
  out.push_back(at_least("tensor.ellipticity", cert, a.mu() * (1.0 - 1e-12)));
  double flux_mean = 0.0;
  for (const auto& row : s.flux.b)
    for (const auto& b : row) flux_mean = std::max(flux_mean, std::abs(cell_mean(b)));
  out.push_back(at_most("flux.mean_zero", flux_mean, kZeroTol));
  const auto& r = s.dual.residuals;
  out.push_back(at_most("dual.flux_identity", r.flux_identity, 1e-8));
  out.push_back(at_most("dual.chi_identity", r.chi_identity, 1e-8));
  out.push_back(at_most("dual.antisymmetry", r.antisymmetry, 0.0));
  out.push_back(at_most("dual.divergence", r.divergence, 5.0 * (g.h() * g.h() + g.tau())));
  out.push_back(at_most("second.mean_zero", std::abs(cell_mean(s.chi2.chi2[0][0])), kZeroTol));
  out.push_back(at_most("lemma51.consistent", s.lemma.consistent, 1e-8));

  // Refinement order of the quadratic identity between the half grid and the
  // configured one.  Below the floor there is nothing to converge.
  GridPolicy half = cfg.grid_policy();
  half.n_y /= 2;
  half.n_s_base /= 2;
  const auto coarse = cell_suite(a, lambda, half.grid_for(lambda), tol);
  double order = std::numeric_limits<double>::quiet_NaN();
  constexpr double kRoundoff = 1e-10;
  if (s.lemma.relative <= kRoundoff) {
    out.push_back(at_most("lemma51.relative", s.lemma.relative, kRoundoff, "degenerate: residual at round-off"));
  } else {
    order = std::log2(coarse.lemma.relative / s.lemma.relative);
    out.push_back(at_least("lemma51.order", order, 1.9));
  }

  if (details) {
    ojson& j = *details;
    j["cell_grid"] = grid_json(g);
    j["coarse_cell_grid"] = grid_json(half.grid_for(lambda));
    j["corrector"] = {{"periods", s.chi.periods},
                      {"residual_norm", s.chi.residual_norm},
                      {"energy_bound", s.chi.energy_bound}};
    j["tensor"] = to_json(s.ahat);
    j["tensor"]["mu_cert"] = cert;
    j["tensor"]["probe_seed"] = cfg.harness.seed;
    j["dual_residuals"] = {{"flux_identity", r.flux_identity},
                           {"chi_identity", r.chi_identity},
                           {"divergence", r.divergence},
                           {"antisymmetry", r.antisymmetry}};
    j["lemma51"] = {{"relative", s.lemma.relative},
                    {"relative_coarse", coarse.lemma.relative},
                    {"consistent", s.lemma.consistent},
                    {"order", order}};
  }
  return out;
}

std::vector<Check> verify_checks(const ExperimentConfig& cfg, ojson* details) {
  auto out = identity_checks(cfg, details);
  const auto more = degenerate_checks(cfg);
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

namespace {

struct Artifacts {
  std::filesystem::path dir;
  bool write = true;
  std::vector<std::filesystem::path> written;
  bool csv = true, json = true, plot = false;

  void put(const std::string& name, const std::string& content) {
    if (!write) return;
    write_atomic(dir / name, content);
    written.push_back(dir / name);
  }
  void put_csv(const std::string& name, const std::string& content) {
    if (csv) put(name, content);
  }
};

using Runner = std::vector<Check> (*)(const ExperimentConfig&, const CommandOptions&, ojson&, Artifacts&);

std::vector<Check> cmd_correctors(const ExperimentConfig& cfg, const CommandOptions&, ojson& res, Artifacts& art) {
  const auto a = cfg.coefficient();
  const double lambda = cfg.harness.lambda;
  const CellGrid g = cfg.grid_policy().grid_for(lambda);
  const auto s = cell_suite(a, lambda, g, cfg.tolerances());
  res["grids"] = {{"cell", grid_json(g)}};
  res["corrector"] = {{"kind", to_string(s.chi.kind)},
                      {"periods", s.chi.periods},
                      {"residual_norm", s.chi.residual_norm},
                      {"energy_bound", s.chi.energy_bound},
                      {"max_slice_mean", max_slice_mean(s.chi)},
                      {"max_abs", max_entry(s.chi.chi)},
                      {"period_history", s.chi.period_history}};
  res["tensor"] = to_json(s.ahat);
  res["dual_residuals"] = {{"flux_identity", s.dual.residuals.flux_identity},
                           {"chi_identity", s.dual.residuals.chi_identity},
                           {"divergence", s.dual.residuals.divergence},
                           {"antisymmetry", s.dual.residuals.antisymmetry}};
  res["second_correctors"] = {{"periods", s.chi2.periods}, {"residual_norm", s.chi2.residual_norm}};
  res["lemma51"] = {{"relative", s.lemma.relative}, {"consistent", s.lemma.consistent}};

  std::vector<std::string> header = g.d == 1 ? std::vector<std::string>{"y", "s", "chi_1"}
                                             : std::vector<std::string>{"y1", "y2", "s", "chi_1", "chi_2"};
  std::vector<std::vector<double>> rows;
  rows.reserve(g.size());
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    const auto m = g.unflatten(idx);
    std::vector<double> row{g.y(m[0])};
    if (g.d == 2) row.push_back(g.y(m[1]));
    row.push_back(g.s(m[2]));
    for (const auto& chi : s.chi.chi) row.push_back(chi[idx]);
    rows.push_back(std::move(row));
  }
  art.put_csv("correctors.csv", to_csv(header, rows));

  return {at_most("corrector.mean_zero", max_slice_mean(s.chi), kZeroTol),
          at_most("dual.flux_identity", s.dual.residuals.flux_identity, 1e-8),
          at_most("dual.chi_identity", s.dual.residuals.chi_identity, 1e-8),
          at_most("dual.antisymmetry", s.dual.residuals.antisymmetry, 0.0),
          at_most("dual.divergence", s.dual.residuals.divergence, 5.0 * (g.h() * g.h() + g.tau())),
          at_most("lemma51.consistent", s.lemma.consistent, 1e-8)};
}

std::vector<Check> cmd_tensor(const ExperimentConfig& cfg, const CommandOptions& opt, ojson& res, Artifacts& art) {
  const auto a = cfg.coefficient();
  const std::string mode = opt.tensor_mode.value_or(cfg.harness.tensor_mode);
  const auto policy = cfg.grid_policy();
  const auto tol = cfg.tolerances();
  EffectiveTensor t;
  CellGrid g;
  if (mode == "lambda") {
    g = policy.grid_for(cfg.harness.lambda);
    t = effective_lambda(a, cfg.harness.lambda, g, tol);
  } else if (mode == "infinity") {
    g = policy.grid_for(1.0);
    t = effective_infinity(a, g, tol);
  } else if (mode == "zero") {
    g = policy.grid_for(1.0);
    t = effective_zero(a, g, tol);
  } else {
    throw Error(ErrorCode::ValidationError, "tensor mode: expected lambda, infinity or zero, got '" + mode + "'");
  }
  t.mu_cert = ellipticity_certificate(t.matrix, cfg.harness.seed);
  t.probe_seed = cfg.harness.seed;
  res["grids"] = {{"cell", grid_json(g)}};
  res["mode"] = mode;
  res["tensor"] = to_json(t);

  std::vector<std::vector<double>> rows;
  for (int i = 0; i < t.matrix.rows(); ++i)
    for (int j = 0; j < t.matrix.cols(); ++j) rows.push_back({double(i + 1), double(j + 1), t.matrix(i, j)});
  art.put_csv("tensor.csv", to_csv({"i", "j", "value"}, rows));
  return {at_least("tensor.ellipticity", t.mu_cert, a.mu() * (1.0 - 1e-12))};
}

std::vector<Check> cmd_sweep(const ExperimentConfig& cfg, const CommandOptions&, ojson& res, Artifacts& art) {
  const auto a = cfg.coefficient();
  const auto s = sweep_lambda(a, cfg.ladders.lambda, cfg.grid_policy(), cfg.tolerances(), cfg.harness.threads,
                              cfg.harness.floor_tol);
  ojson grids = ojson::array();
  for (double l : cfg.ladders.lambda) grids.push_back(grid_json(cfg.grid_policy().grid_for(l)));
  res["grids"] = {{"cell", grids}};
  res["sweep"] = to_json(s);
  bool monotone = true;
  for (std::size_t i = 1; i < s.distances_to_infinity.size(); ++i)
    monotone = monotone && s.distances_to_infinity[i] <= s.distances_to_infinity[i - 1];
  res["dist_inf_monotone"] = monotone;

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < s.lambdas.size(); ++i)
    rows.push_back({s.lambdas[i], s.distances_to_infinity[i], s.distances_to_zero[i],
                    s.corrector_distance_infinity[i], s.corrector_distance_zero[i]});
  art.put_csv("sweep.csv",
              to_csv({"lambda", "dist_inf", "dist_zero", "corrector_dist_inf", "corrector_dist_zero"}, rows));

  if (s.degenerate) {
    Check c{"sweep.degenerate", 1.0, 1.0, "==", true, "every distance below floor_tol"};
    return {c};
  }
  const auto& h = cfg.harness;
  return {at_most("sweep.slope_high", s.slope_high, h.sweep_high_max),
          at_least("sweep.slope_low", s.slope_low, h.sweep_low_min),
          at_most("sweep.slope_corrector_high", s.slope_corrector_high, h.sweep_high_max),
          at_least("sweep.slope_corrector_low", s.slope_corrector_low, h.sweep_low_min)};
}

std::vector<Check> rate_command(const ExperimentConfig& cfg, ojson& res, Artifacts& art, bool h1) {
  const auto a = cfg.coefficient();
  const std::string stem = h1 ? "rate_h1" : "rate_l2";
  std::vector<Check> checks;
  ojson reports = ojson::array();
  for (double k : cfg.problem.k) {
    RateOptions opt = cfg.rate_options();
    opt.slope_tol = cfg.slope_tol_for(k);
    const auto r = h1 ? run_h1_twoscale_rate(a, k, cfg.ladders.eps, opt) : run_l2_rate(a, k, cfg.ladders.eps, opt);
    ojson j{{"k", k}};
    j.update(to_json(r));
    reports.push_back(j);
    const std::string name = stem + "_k" + tag(k);
    art.put_csv(name + ".csv", rate_csv(r));
    if (art.plot) art.put(name + ".svg", rate_svg(r, stem + ", k = " + tag(k)));
    if (r.degenerate)
      checks.push_back({name + ".slope", r.slope(), r.predicted_exponent - r.slope_tol, ">=", true,
                        "degenerate: error below floor_tol"});
    else
      checks.push_back(at_least(name + ".slope", r.slope(), r.predicted_exponent - r.slope_tol));
  }
  res["reports"] = reports;
  return checks;
}

std::vector<Check> cmd_rate_l2(const ExperimentConfig& cfg, const CommandOptions&, ojson& res, Artifacts& art) {
  return rate_command(cfg, res, art, false);
}

std::vector<Check> cmd_rate_h1(const ExperimentConfig& cfg, const CommandOptions&, ojson& res, Artifacts& art) {
  return rate_command(cfg, res, art, true);
}

ojson profile_grids(const ExperimentConfig& cfg, double k, const std::vector<double>& eps) {
  ojson meshes = ojson::array();
  for (double e : eps) {
    ojson m = mesh_json(resolved_mesh(cfg.problem.d, ScaleParams(e, k), cfg.problem.T, cfg.policy()));
    m["eps"] = e;
    meshes.push_back(m);
  }
  return meshes;
}

std::vector<Check> cmd_lipschitz(const ExperimentConfig& cfg, const CommandOptions&, ojson& res, Artifacts& art) {
  const auto a = cfg.coefficient();
  const auto opt = cfg.profile_options();
  std::vector<Check> checks;
  ojson runs = ojson::array();
  std::vector<std::vector<double>> rows;
  for (double k : cfg.problem.k) {
    ojson profiles = ojson::array();
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double e : cfg.ladders.eps) {
      const auto p = run_lipschitz(a, ScaleParams(e, k), opt);
      lo = std::min(lo, p.max_ratio);
      hi = std::max(hi, p.max_ratio);
      ojson j{{"eps", e}};
      j.update(to_json(p));
      profiles.push_back(j);
      for (std::size_t i = 0; i < p.radii.size(); ++i) rows.push_back({k, e, p.radii[i], p.energy[i], p.ratio[i]});
    }
    const double eps_min = cfg.ladders.eps.back();
    const auto affine = corrected_affine_profile(a, ScaleParams(eps_min, k), opt);
    ojson aff{{"eps", eps_min}};
    aff.update(to_json(affine));
    runs.push_back({{"k", k},
                    {"profiles", profiles},
                    {"variation", hi / lo - 1.0},
                    {"corrected_affine", aff},
                    {"meshes", profile_grids(cfg, k, cfg.ladders.eps)}});
    checks.push_back(at_most("lipschitz_k" + tag(k) + ".variation", hi / lo - 1.0, cfg.harness.lipschitz_variation));
    checks.push_back(
        at_most("lipschitz_k" + tag(k) + ".affine_flatness", affine.flatness, cfg.harness.flatness_tol));
  }
  res["runs"] = runs;
  art.put_csv("lipschitz.csv", to_csv({"k", "eps", "r", "energy", "ratio"}, rows));
  return checks;
}

std::vector<Check> cmd_excess(const ExperimentConfig& cfg, const CommandOptions&, ojson& res, Artifacts& art) {
  const auto a = cfg.coefficient();
  const auto opt = cfg.profile_options();
  const double e = cfg.ladders.eps.back();
  std::vector<Check> checks;
  ojson runs = ojson::array();
  std::vector<std::vector<double>> rows;
  for (double k : cfg.problem.k) {
    const auto p = run_excess(a, ScaleParams(e, k), opt, cfg.harness.order);
    ojson j{{"k", k}, {"eps", e}, {"mesh", profile_grids(cfg, k, {e})[0]}};
    j.update(to_json(p));
    runs.push_back(j);
    for (std::size_t i = 0; i < p.radii.size(); ++i) rows.push_back({k, e, p.radii[i], p.excess[i], p.energy[i]});
    checks.push_back(at_least("excess_k" + tag(k) + ".decay_slope", p.decay.slope, cfg.harness.alpha_floor));
  }
  res["runs"] = runs;
  art.put_csv("excess.csv", to_csv({"k", "eps", "r", "excess", "energy"}, rows));
  return checks;
}

std::vector<Check> cmd_verify(const ExperimentConfig& cfg, const CommandOptions&, ojson& res, Artifacts& art) {
  ojson details;
  auto checks = verify_checks(cfg, &details);
  res["grids"] = {{"cell", details["cell_grid"]}, {"coarse_cell", details["coarse_cell_grid"]}};
  details.erase("cell_grid");
  details.erase("coarse_cell_grid");
  res["details"] = details;
  std::string csv = "check,value,relation,threshold,pass\n";
  for (const auto& c : checks)
    csv += c.name + "," + num(c.value) + "," + c.relation + "," + num(c.threshold) + "," + (c.pass ? "true" : "false") +
           "\n";
  art.put_csv("verify.csv", csv);
  return checks;
}

Runner runner_for(const std::string& command) {
  if (command == "correctors") return cmd_correctors;
  if (command == "tensor") return cmd_tensor;
  if (command == "sweep-lambda") return cmd_sweep;
  if (command == "rate-l2") return cmd_rate_l2;
  if (command == "rate-h1") return cmd_rate_h1;
  if (command == "lipschitz") return cmd_lipschitz;
  if (command == "excess") return cmd_excess;
  if (command == "verify") return cmd_verify;
  throw Error(ErrorCode::InvalidArgument, "unknown command '" + command + "'");
}

ojson failure_json(const std::string& command, int exit_code) {
  return {{"command", command}, {"version", version()}, {"exit_code", exit_code}};
}

}  // namespace

void write_failure_record(const std::filesystem::path& dir, const std::string& command, int exit_code,
                          const std::string& error_code, const std::string& message) {
  ojson j = failure_json(command, exit_code);
  j["error"] = {{"code", error_code}, {"message", message}};
  write_atomic(dir / "failure.json", dump_json(j));
}

CommandOutcome run_command(const std::string& command, const ExperimentConfig& cfg, const CommandOptions& options) {
  CommandOutcome out;
  const Runner run = runner_for(command);
  Artifacts art;
  art.dir = std::filesystem::path(cfg.output.directory) / command;
  art.write = options.write;
  art.json = std::find(cfg.output.formats.begin(), cfg.output.formats.end(), "json") != cfg.output.formats.end();
  art.csv = std::find(cfg.output.formats.begin(), cfg.output.formats.end(), "csv") != cfg.output.formats.end();
  art.plot = cfg.output.plot;

  ojson report{{"command", command}, {"version", version()}, {"config_digest", hex64(config_digest(cfg))}};
  report["config"] = config_to_json(cfg);
  try {
    ojson results;
    if (command == "tensor") report["mode"] = options.tensor_mode.value_or(cfg.harness.tensor_mode);
    out.checks = run(cfg, options, results, art);
    for (auto& [key, value] : results.items()) report[key] = value;
    ojson checks = ojson::array();
    for (const auto& c : out.checks) checks.push_back(to_json(c));
    report["checks"] = checks;
    const auto failed = std::find_if(out.checks.begin(), out.checks.end(), [](const Check& c) { return !c.pass; });
    report["pass"] = failed == out.checks.end();
    out.exit_code = failed == out.checks.end() ? 0 : 1;
    out.report = report;
    if (art.json) art.put("report.json", dump_json(report));
    if (options.write) {
      std::error_code ec;
      if (out.exit_code == 0) {
        std::filesystem::remove(art.dir / "failure.json", ec);
      } else {
        ojson f = failure_json(command, 1);
        f["first_failure"] = to_json(*failed);
        art.put("failure.json", dump_json(f));
      }
    }
  } catch (const Error& e) {
    out.exit_code = exit_code_for(e.code());
    out.error = e.what();
    out.report = report;
    if (options.write) {
      write_failure_record(art.dir, command, out.exit_code, std::string(to_string(e.code())), e.what());
      art.written.push_back(art.dir / "failure.json");
    }
  }
  out.artifacts = art.written;
  return out;
}

}  // namespace parahom
