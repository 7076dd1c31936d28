#include "parahom/rates.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "parahom/error.hpp"
#include "parallel.hpp"

namespace parahom {

namespace {

void check_k(double k) {
  if (!(k > 0.0) || !std::isfinite(k)) {
    std::ostringstream os;
    os << "time exponent k must be positive, got " << k;
    throw Error(ErrorCode::NonPositiveK, os.str());
  }
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

double predicted_l2_exponent(double k) {
  check_k(k);
  if (k <= 4.0 / 3.0) return k / 2.0;
  if (k < 2.0) return 2.0 - k;
  if (k == 2.0) return 1.0;
  if (k < 3.0) return k - 2.0;
  return 1.0;
}

double predicted_h1_exponent(double k) {
  check_k(k);
  if (k <= 8.0 / 5.0) return k / 4.0;
  if (k < 2.0) return 2.0 - k;
  if (k == 2.0) return 0.5;
  if (k < 2.5) return k - 2.0;
  return 0.5;
}

double default_slope_tol(double k) { return k > 2.0 ? 0.2 : 0.15; }

RateReport fit_rate(std::vector<RateSample> samples, double predicted, double slope_tol, double floor_tol) {
  if (samples.size() < 3) throw Error(ErrorCode::TooFewSamples, "a rate fit needs at least 3 samples");
  std::sort(samples.begin(), samples.end(), [](const RateSample& a, const RateSample& b) { return a.param < b.param; });
  RateReport rep;
  rep.predicted_exponent = predicted;
  rep.slope_tol = slope_tol;
  rep.floor_tol = floor_tol;
  std::vector<double> x, y;
  for (auto& s : samples) {
    if (!(s.param > 0.0)) throw Error(ErrorCode::InvalidArgument, "rate parameters must be positive");
    s.below_floor = !(s.error >= floor_tol);
    if (!s.below_floor) {
      x.push_back(s.param);
      y.push_back(s.error);
    }
  }
  rep.samples = std::move(samples);
  if (x.empty()) throw Error(ErrorCode::AllBelowFloor, "every error is below floor_tol");
  if (x.size() < 2) throw Error(ErrorCode::TooFewSamples, "fewer than 2 samples above floor_tol");
  rep.fit = fit_loglog(x, y);
  if (rep.fit.r2 < 0.95 && x.size() >= 4) {
    x.pop_back();
    y.pop_back();
    rep.refit = fit_loglog(x, y);
  }
  rep.pass = rep.slope() >= predicted - slope_tol;
  return rep;
}

SpaceTimeFn rate_source(int d) {
  using std::numbers::pi;
  if (d == 1) return [](const Point& x, double) { return std::sin(pi * x[0]); };
  return [](const Point& x, double) { return std::sin(pi * x[0]) * std::sin(pi * x[1]); };
}

EffectiveTensor branch_tensor(const CoefficientField& a, double k, const GridPolicy& cell,
                              const SolverTolerances& tol) {
  check_k(k);
  const CellGrid g = cell.grid_for(1.0);
  if (k < 2.0) return effective_infinity(a, g, tol);
  if (k == 2.0) return effective_lambda(a, 1.0, g, tol);
  return effective_zero(a, g, tol);
}

namespace {

std::vector<double> checked_ladder(const CoefficientField& a, double k, std::vector<double> eps) {
  check_k(k);
  if (eps.size() < 4) throw Error(ErrorCode::TooFewSamples, "eps ladders need at least 4 points");
  for (double e : eps)
    if (!(e > 0.0 && e < 1.0)) throw Error(ErrorCode::InvalidArgument, "eps must lie in (0, 1)");
  std::sort(eps.begin(), eps.end());
  if (k != 2.0 && !a.smooth())
    throw Error(ErrorCode::RoughCoefficientRejected,
                "rates for k != 2 need bounds on d_s A (k < 2) or the second derivatives of A (k > 2); " + a.name() +
                    " provides none");
  if (a.d() != 1 && a.d() != 2) throw Error(ErrorCode::InvalidArgument, "dimension must be 1 or 2");
  return eps;
}

IVProblem streamed(IVProblem p) {
  p.source_steady = true;
  p.boundary_zero = true;
  return p;
}

SpaceTimeFn zero_data() {
  return [](const Point&, double) { return 0.0; };
}

RateReport finish(std::vector<RateSample> samples, double predicted, double tol, double floor_tol) {
  try {
    return fit_rate(samples, predicted, tol, floor_tol);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AllBelowFloor) throw;
  }
  RateReport rep;
  std::sort(samples.begin(), samples.end(), [](const RateSample& a, const RateSample& b) { return a.param < b.param; });
  for (auto& s : samples) s.below_floor = true;
  rep.samples = std::move(samples);
  rep.predicted_exponent = predicted;
  rep.slope_tol = tol;
  rep.floor_tol = floor_tol;
  rep.fit = {kNaN, kNaN, kNaN};
  rep.degenerate = true;
  // The estimates are upper bounds; errors at round-off satisfy them.
  rep.pass = true;
  return rep;
}

}  // namespace

RateReport run_l2_rate(const CoefficientField& a, double k, std::vector<double> eps_ladder, const RateOptions& opt) {
  eps_ladder = checked_ladder(a, k, std::move(eps_ladder));
  if (a.d() != opt.d) throw Error(ErrorCode::InvalidArgument, "coefficient dimension differs from options.d");
  const EffectiveTensor ahat = branch_tensor(a, k, opt.cell, opt.tol);
  const SpaceTimeFn F = rate_source(opt.d);
  std::vector<RateSample> samples(eps_ladder.size());
  parallel_for(int(eps_ladder.size()), opt.threads, [&](int i) {
    const ScaleParams sc(eps_ladder[i], k);
    const SpaceTimeMesh mesh = resolved_mesh(opt.d, sc, opt.T, opt.policy);
    check_resolution(mesh, sc, opt.policy);
    IvpMarcher ue(streamed(oscillating_problem(a, sc, F, zero_data())), mesh, opt.scheme);
    IvpMarcher u0(streamed(homogenized_problem(ahat.matrix, F, zero_data())), mesh, opt.scheme);
    DiscrepancyAccumulator acc(mesh);
    std::vector<double> diff(mesh.level_size());
    for (;;) {
      const auto x = ue.current(), y = u0.current();
      for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = x[j] - y[j];
      acc.add(ue.level(), diff);
      if (ue.level() == mesh.nt) break;
      ue.step();
      u0.step();
    }
    samples[i] = {sc.epsilon, acc.result().l2, false, mesh.nx, mesh.nt};
  });
  const double tol = opt.slope_tol < 0.0 ? default_slope_tol(k) : opt.slope_tol;
  return finish(std::move(samples), predicted_l2_exponent(k), tol, opt.floor_tol);
}

RateReport run_h1_twoscale_rate(const CoefficientField& a, double k, std::vector<double> eps_ladder,
                                const RateOptions& opt) {
  eps_ladder = checked_ladder(a, k, std::move(eps_ladder));
  if (a.d() != opt.d) throw Error(ErrorCode::InvalidArgument, "coefficient dimension differs from options.d");
  const CellGrid cell = opt.cell.grid_for(1.0);
  CorrectorSet chi;
  ExpansionVariant variant = ExpansionVariant::VEps;
  double time_exponent = k;
  if (k == 2.0) {
    chi = solve_parabolic_corrector(a, 1.0, cell, opt.tol);
    variant = ExpansionVariant::WTilde;
    time_exponent = 2.0;
  } else if (k < 2.0) {
    chi = solve_elliptic_corrector_infty(a, cell, opt.tol);
  } else {
    chi = solve_elliptic_corrector_zero(a, cell, opt.tol);
  }
  const EffectiveTensor ahat = branch_tensor(a, k, opt.cell, opt.tol);
  const SpaceTimeFn F = rate_source(opt.d);
  std::vector<RateSample> samples(eps_ladder.size());
  parallel_for(int(eps_ladder.size()), opt.threads, [&](int i) {
    const ScaleParams sc(eps_ladder[i], k);
    const double delta = sc.delta();
    const SpaceTimeMesh mesh = resolved_mesh(opt.d, sc, opt.T, opt.policy);
    check_resolution(mesh, sc, opt.policy);
    const IVProblem p0 = streamed(homogenized_problem(ahat.matrix, F, zero_data()));
    // Pass 1: u_0 at a stride resolving delta^2, smoothed once.
    const int stride = std::max(1, int(std::floor(delta * delta / (8.0 * mesh.tau()))));
    std::optional<TwoScaleCorrection> corr;
    {
      const FieldOnMesh u0 = solve_homogenized(p0, mesh, opt.scheme, stride);
      const CutoffField cutoff = build_cutoff(u0, delta);
      corr.emplace(u0, ExpansionCorrectors{&chi, nullptr, time_exponent}, sc, MollifierSpec{delta}, cutoff, variant);
    }
    // Pass 2: u_eps and u_0 in lockstep against the stored correction.
    IvpMarcher ue(streamed(oscillating_problem(a, sc, F, zero_data())), mesh, opt.scheme);
    IvpMarcher u0(p0, mesh, opt.scheme);
    DiscrepancyAccumulator acc(mesh);
    std::vector<double> w(mesh.level_size()), diff(mesh.level_size());
    for (;;) {
      const auto y = u0.current();
      std::copy(y.begin(), y.end(), w.begin());
      corr->add_to(ue.level(), w);
      const auto x = ue.current();
      for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = x[j] - w[j];
      acc.add(ue.level(), diff);
      if (ue.level() == mesh.nt) break;
      ue.step();
      u0.step();
    }
    samples[i] = {sc.epsilon, acc.result().l2h1, false, mesh.nx, mesh.nt};
  });
  const double tol = opt.slope_tol < 0.0 ? default_slope_tol(k) : opt.slope_tol;
  return finish(std::move(samples), predicted_h1_exponent(k), tol, opt.floor_tol);
}

// ---------------------------------------------------------------------------

void check_cylinder(const SpaceTimeMesh& mesh, const Anchor& anchor, double R) {
  const double t0 = anchor.t < 0.0 ? mesh.T : anchor.t;
  bool inside = R > 0.0 && t0 - R * R >= -1e-12 && t0 <= mesh.T * (1.0 + 1e-12);
  for (int i = 0; i < mesh.d; ++i) inside = inside && anchor.x[i] - R >= -1e-12 && anchor.x[i] + R <= 1.0 + 1e-12;
  if (!inside) {
    std::ostringstream os;
    os << "Q_R with R = " << R << " at (" << anchor.x[0];
    if (mesh.d == 2) os << ", " << anchor.x[1];
    os << "; " << t0 << ") leaves Omega_T";
    throw Error(ErrorCode::CylinderOutOfDomain, os.str());
  }
}

CylinderQuadrature::CylinderQuadrature(const SpaceTimeMesh& mesh, const Anchor& anchor, std::vector<double> radii,
                                       int fields)
    : mesh_(mesh), anchor_(anchor), t0_(anchor.t < 0.0 ? mesh.T : anchor.t), radii_(std::move(radii)),
      fields_(fields) {
  if (radii_.empty() || fields < 1) throw Error(ErrorCode::InvalidArgument, "cylinder quadrature needs radii and fields");
  std::sort(radii_.begin(), radii_.end());
  check_cylinder(mesh, anchor, radii_.back());
  const double n0 = t0_ / mesh.tau();
  if (std::abs(n0 - std::round(n0)) > 1e-6) throw Error(ErrorCode::InvalidArgument, "anchor time must be a mesh level");
  const int last = int(std::round(n0));
  for (double r : radii_) {
    int first = int(std::ceil((t0_ - r * r) / mesh.tau() - 1e-9));
    first_level_.push_back(std::clamp(first, 0, last));
  }
  gram_.assign(radii_.size(), std::vector<double>(std::size_t(fields) * fields, 0.0));
  weight_.assign(radii_.size(), 0.0);
  source_.assign(radii_.size(), 0.0);
  source_weight_.assign(radii_.size(), 0.0);
  // Cells (by lower node) with midpoint in B(x0, R), binned by the smallest
  // radius whose ball contains the midpoint.
  const int c2 = mesh.d == 2 ? mesh.nx : 1;
  const double h = mesh.h();
  for (int i2 = 0; i2 < c2; ++i2)
    for (int i1 = 0; i1 < mesh.nx; ++i1) {
      const Point m{mesh.x(i1) + 0.5 * h, mesh.d == 2 ? mesh.x(i2) + 0.5 * h : 0.0};
      double d2 = (m[0] - anchor.x[0]) * (m[0] - anchor.x[0]);
      if (mesh.d == 2) d2 += (m[1] - anchor.x[1]) * (m[1] - anchor.x[1]);
      const auto it = std::upper_bound(radii_.begin(), radii_.end(), std::sqrt(d2));
      if (it == radii_.end()) continue;
      cell_nodes_.push_back(mesh.node(i1, i2));
      cell_shell_.push_back(int(it - radii_.begin()));
      cell_mid_.push_back(m);
    }
}

double CylinderQuadrature::time_weight(int r, int n) const {
  const int first = first_level_[r];
  const int last = int(std::round(t0_ / mesh_.tau()));
  if (n < first || n > last) return 0.0;
  if (first == last) return 1.0;
  return n == first || n == last ? 0.5 : 1.0;
}

bool CylinderQuadrature::wants(int n) const { return time_weight(int(radii_.size()) - 1, n) > 0.0; }

namespace {

// Gradient of v on the cell with lower node `node`.
std::array<double, 2> cell_gradient(const SpaceTimeMesh& mesh, std::span<const double> v, std::size_t node) {
  const double h = mesh.h();
  if (mesh.d == 1) return {(v[node + 1] - v[node]) / h, 0.0};
  const std::size_t up = node + std::size_t(mesh.nx + 1);
  return {0.5 * ((v[node + 1] - v[node]) + (v[up + 1] - v[up])) / h,
          0.5 * ((v[up] - v[node]) + (v[up + 1] - v[node + 1])) / h};
}

}  // namespace

void CylinderQuadrature::add(int n, const std::vector<std::span<const double>>& fields) {
  if (int(fields.size()) != fields_) throw Error(ErrorCode::InvalidArgument, "field count differs");
  if (!wants(n)) return;
  const std::size_t nr = radii_.size(), nf = std::size_t(fields_);
  std::vector<double> shell_sum(nr * nf * nf, 0.0), shell_vol(nr, 0.0);
  std::vector<std::array<double, 2>> g(nf);
  const double vol = mesh_.d == 2 ? mesh_.h() * mesh_.h() : mesh_.h();
  for (std::size_t c = 0; c < cell_nodes_.size(); ++c) {
    for (std::size_t f = 0; f < nf; ++f) g[f] = cell_gradient(mesh_, fields[f], cell_nodes_[c]);
    double* dst = &shell_sum[std::size_t(cell_shell_[c]) * nf * nf];
    for (std::size_t a = 0; a < nf; ++a)
      for (std::size_t b = a; b < nf; ++b) dst[a * nf + b] += g[a][0] * g[b][0] + g[a][1] * g[b][1];
    shell_vol[cell_shell_[c]] += 1.0;
  }
  std::vector<double> cum(nf * nf, 0.0);
  double cum_vol = 0.0;
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t q = 0; q < nf * nf; ++q) cum[q] += shell_sum[r * nf * nf + q];
    cum_vol += shell_vol[r];
    const double w = time_weight(int(r), n) * mesh_.tau() * vol;
    if (w == 0.0) continue;
    for (std::size_t a = 0; a < nf; ++a)
      for (std::size_t b = a; b < nf; ++b) {
        gram_[r][a * nf + b] += w * cum[a * nf + b];
        if (b != a) gram_[r][b * nf + a] = gram_[r][a * nf + b];
      }
    weight_[r] += w * cum_vol;
  }
}

void CylinderQuadrature::add_source(int n, const SpaceTimeFn& F, double p) {
  if (!wants(n) || !F) return;
  const std::size_t nr = radii_.size();
  std::vector<double> shell_sum(nr, 0.0), shell_vol(nr, 0.0);
  const double t = mesh_.t(n);
  for (std::size_t c = 0; c < cell_nodes_.size(); ++c) {
    shell_sum[cell_shell_[c]] += std::pow(std::abs(F(cell_mid_[c], t)), p);
    shell_vol[cell_shell_[c]] += 1.0;
  }
  double cum = 0.0, cum_vol = 0.0;
  for (std::size_t r = 0; r < nr; ++r) {
    cum += shell_sum[r];
    cum_vol += shell_vol[r];
    const double w = time_weight(int(r), n);
    source_[r] += w * cum;
    source_weight_[r] += w * cum_vol;
  }
}

double CylinderQuadrature::mean(int r, int a, int b) const {
  if (weight_[r] == 0.0) throw Error(ErrorCode::SingularLeastSquares, "cylinder contains no quadrature cells");
  return gram_[r][std::size_t(a) * fields_ + b] / weight_[r];
}

double CylinderQuadrature::source_mean(int r) const {
  return source_weight_[r] > 0.0 ? source_[r] / source_weight_[r] : 0.0;
}

std::vector<double> lipschitz_radii(const ScaleParams& scale, double R, int n_radii) {
  const double r_min = scale.delta();
  if (!(r_min < R)) {
    std::ostringstream os;
    os << "lower radius eps + eps^(k/2) = " << r_min << " is not below R = " << R;
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
  if (n_radii < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 radii");
  std::vector<double> r(n_radii);
  for (int i = 0; i < n_radii; ++i) r[i] = r_min * std::pow(R / r_min, double(i) / (n_radii - 1));
  r.back() = R;
  return r;
}

LipschitzProfile lipschitz_from_quadrature(const CylinderQuadrature& q, double p) {
  LipschitzProfile prof;
  prof.radii = q.radii();
  prof.p = p;
  const int last = int(prof.radii.size()) - 1;
  for (int r = 0; r <= last; ++r) prof.energy.push_back(std::sqrt(q.mean(r, 0, 0)));
  prof.normalizer = prof.energy.back() + prof.radii.back() * std::pow(q.source_mean(last), 1.0 / p);
  double lo = prof.energy[0], hi = prof.energy[0];
  for (double e : prof.energy) {
    prof.ratio.push_back(e / prof.normalizer);
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  prof.max_ratio = *std::max_element(prof.ratio.begin(), prof.ratio.end());
  prof.flatness = lo > 0.0 ? hi / lo - 1.0 : kNaN;
  return prof;
}

LipschitzProfile lipschitz_profile(const FieldOnMesh& u, const SpaceTimeFn& F, const ScaleParams& scale,
                                   const Anchor& anchor, double R, double p, int n_radii) {
  const SpaceTimeMesh& mesh = u.mesh();
  if (!(p > mesh.d + 2)) throw Error(ErrorCode::InvalidArgument, "p must exceed d + 2");
  check_cylinder(mesh, anchor, R);
  if (u.stride() != 1) throw Error(ErrorCode::InvalidArgument, "profiles need every time level inside Q_R");
  CylinderQuadrature q(mesh, anchor, lipschitz_radii(scale, R, n_radii), 1);
  for (int n = 0; n <= mesh.nt; ++n) {
    if (!q.wants(n)) continue;
    if (!u.stores(n)) throw Error(ErrorCode::InvalidArgument, "profiles need every time level inside Q_R");
    q.add(n, {u.level((n - u.first()) / u.stride())});
    q.add_source(n, F, p);
  }
  return lipschitz_from_quadrature(q, p);
}

// ---------------------------------------------------------------------------

CorrectedPolynomialBasis::CorrectedPolynomialBasis(const SpaceTimeMesh& mesh, const ScaleParams& scale,
                                                   const CorrectorSet& chi, const SecondCorrectorSet* chi2, int order)
    : mesh_(mesh), scale_(scale), chi_(&chi), chi2_(chi2) {
  if (order != 1 && order != 2) throw Error(ErrorCode::InvalidArgument, "order must be 1 or 2");
  if (chi.grid.d != mesh.d) throw Error(ErrorCode::MeshMismatch, "corrector dimension differs from the mesh");
  if (order == 2 && chi2 == nullptr) throw Error(ErrorCode::InvalidArgument, "order 2 needs second correctors");
  for (int j = 0; j < mesh.d; ++j) labels_.push_back({-1, j});
  if (order == 2)
    for (int k = 0; k < mesh.d; ++k)
      for (int l = k; l < mesh.d; ++l) labels_.push_back({k, l});
  values_.assign(labels_.size(), std::vector<double>(mesh.level_size()));
}

void CorrectedPolynomialBasis::evaluate(int n) {
  const double eps = scale_.epsilon;
  const double s = mesh_.t(n) / (eps * eps);
  const int d = mesh_.d;
  const int nx = mesh_.nx;
  const int n2 = d == 2 ? nx + 1 : 1;
  // Corrector values repeat every P nodes when nx * eps is an integer.
  const double per = nx * eps;
  const int P = std::abs(per - std::round(per)) < 1e-9 && per >= 1.0 ? int(std::round(per)) : 0;
  auto tabulate = [&](const CellField& f) {
    const PeriodicSampler sample(f);
    std::vector<double> out(mesh_.level_size());
    if (P > 0) {
      const int q2 = d == 2 ? P : 1;
      std::vector<double> table(std::size_t(P) * q2);
      for (int b = 0; b < q2; ++b)
        for (int a = 0; a < P; ++a) table[a + std::size_t(P) * b] = sample(double(a) / P, double(b) / P, s);
      for (int i2 = 0; i2 < n2; ++i2)
        for (int i1 = 0; i1 <= nx; ++i1)
          out[mesh_.node(i1, i2)] = table[std::size_t(i1 % P) + std::size_t(P) * (d == 2 ? i2 % P : 0)];
    } else {
      for (int i2 = 0; i2 < n2; ++i2)
        for (int i1 = 0; i1 <= nx; ++i1) out[mesh_.node(i1, i2)] = sample(mesh_.x(i1) / eps, mesh_.x(i2) / eps, s);
    }
    return out;
  };
  std::vector<std::vector<double>> chi(d);
  for (int j = 0; j < d; ++j) chi[j] = tabulate(chi_->chi[j]);
  auto coord = [&](int axis, int i1, int i2) { return mesh_.x(axis == 0 ? i1 : i2); };
  for (std::size_t b = 0; b < labels_.size(); ++b) {
    const auto [k, l] = labels_[b];
    auto& v = values_[b];
    std::vector<double> c2;
    if (k >= 0) c2 = tabulate(chi2_->chi2[k][l]);
    for (int i2 = 0; i2 < n2; ++i2)
      for (int i1 = 0; i1 <= nx; ++i1) {
        const std::size_t node = mesh_.node(i1, i2);
        if (k < 0) {
          v[node] = coord(l, i1, i2) + eps * chi[l][node];
        } else {
          const double xk = coord(k, i1, i2), xl = coord(l, i1, i2);
          v[node] = xk * xl + eps * (xk * chi[l][node] + xl * chi[k][node]) + eps * eps * c2[node];
        }
      }
  }
}

namespace {

// Minimizes mean |grad (u - sum c_b phi_b)|^2 from the Gram matrix of
// [u, phi_1, ...]; returns the coefficients and the minimum.
std::pair<std::vector<double>, double> least_squares(const CylinderQuadrature& q, int r, int m) {
  Eigen::MatrixXd G(m, m);
  Eigen::VectorXd rhs(m);
  for (int a = 0; a < m; ++a) {
    rhs(a) = q.mean(r, 0, a + 1);
    for (int b = 0; b < m; ++b) G(a, b) = q.mean(r, a + 1, b + 1);
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (!(top > 0.0) || eig.eigenvalues().minCoeff() <= 1e-12 * top) {
    std::ostringstream os;
    os << "corrected-polynomial basis is degenerate on Q_r, r = " << q.radii()[r];
    throw Error(ErrorCode::SingularLeastSquares, os.str());
  }
  const Eigen::VectorXd c = G.ldlt().solve(rhs);
  const double value = std::max(0.0, q.mean(r, 0, 0) - rhs.dot(c));
  return {std::vector<double>(c.data(), c.data() + m), value};
}

double second_order_e0(const CorrectedPolynomialBasis& basis, const std::vector<double>& c, const Matrix& ahat) {
  // P carries sum_{k,l} e_kl (...) with e_kl = e_lk, so the basis function
  // for k < l carries 2 e_kl.
  double e0 = 0.0;
  for (int b = 0; b < basis.size(); ++b) {
    const auto [k, l] = basis.label(b);
    if (k < 0) continue;
    e0 += k == l ? 2.0 * c[b] * ahat(k, k) : c[b] * (ahat(k, l) + ahat(l, k));
  }
  return e0;
}

void fit_decay(ExcessProfile& prof) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < prof.radii.size(); ++i)
    if (prof.excess[i] > 1e-14 * std::max(1.0, prof.energy[i])) {
      x.push_back(prof.radii[i]);
      y.push_back(prof.excess[i]);
    }
  prof.decay = x.size() >= 2 ? fit_loglog(x, y) : LineFit{kNaN, kNaN, kNaN};
}

}  // namespace

ExcessProfile excess_from_quadrature(const CylinderQuadrature& q, const CorrectedPolynomialBasis& basis,
                                     const Matrix* ahat, int order) {
  if (order == 2 && ahat == nullptr) throw Error(ErrorCode::InvalidArgument, "order 2 needs the effective tensor");
  ExcessProfile prof;
  prof.order = order;
  prof.radii = q.radii();
  const int m = basis.size();
  for (int r = 0; r < int(prof.radii.size()); ++r) {
    auto [c, value] = least_squares(q, r, m);
    prof.excess.push_back(std::sqrt(value));
    prof.energy.push_back(std::sqrt(q.mean(r, 0, 0)));
    if (order == 2) prof.e0.push_back(second_order_e0(basis, c, *ahat));
    prof.coefficients.push_back(std::move(c));
  }
  fit_decay(prof);
  return prof;
}

ExcessProfile excess_profile(const FieldOnMesh& u, const CorrectorSet& chi, const SecondCorrectorSet* chi2,
                             const Matrix* ahat, const ScaleParams& scale, const Anchor& anchor,
                             const std::vector<double>& radii, int order) {
  const SpaceTimeMesh& mesh = u.mesh();
  if (order == 2 && (chi2 == nullptr || ahat == nullptr))
    throw Error(ErrorCode::InvalidArgument, "order 2 needs second correctors and the effective tensor");
  CorrectedPolynomialBasis basis(mesh, scale, chi, chi2, order);
  const int m = basis.size();
  CylinderQuadrature q(mesh, anchor, radii, m + 1);
  auto level = [&](int n) {
    if (!u.stores(n)) throw Error(ErrorCode::InvalidArgument, "excess needs every time level inside Q_R");
    return u.level((n - u.first()) / u.stride());
  };
  for (int n = 0; n <= mesh.nt; ++n) {
    if (!q.wants(n)) continue;
    basis.evaluate(n);
    std::vector<std::span<const double>> f{level(n)};
    for (int b = 0; b < m; ++b) f.push_back(basis.values(b));
    q.add(n, f);
  }
  ExcessProfile prof = excess_from_quadrature(q, basis, ahat, order);
  // Second pass: residual of the fitted polynomial per radius, free of the
  // cancellation in the Gram form.
  const int nr = int(q.radii().size());
  CylinderQuadrature res(mesh, anchor, q.radii(), nr);
  std::vector<std::vector<double>> resid(nr, std::vector<double>(mesh.level_size()));
  for (int n = 0; n <= mesh.nt; ++n) {
    if (!res.wants(n)) continue;
    basis.evaluate(n);
    const auto un = level(n);
    std::vector<std::span<const double>> f;
    for (int r = 0; r < nr; ++r) {
      auto& v = resid[r];
      std::copy(un.begin(), un.end(), v.begin());
      for (int b = 0; b < m; ++b) {
        const double c = prof.coefficients[r][b];
        const auto phi = basis.values(b);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * phi[i];
      }
      f.push_back(v);
    }
    res.add(n, f);
  }
  for (int r = 0; r < nr; ++r) prof.excess[r] = std::sqrt(res.mean(r, r, r));
  fit_decay(prof);
  return prof;
}

// ---------------------------------------------------------------------------

namespace {

void check_profile_options(const CoefficientField& a, const ProfileOptions& opt) {
  if (a.d() != opt.d) throw Error(ErrorCode::InvalidArgument, "coefficient dimension differs from options.d");
  if (!(opt.p > opt.d + 2)) throw Error(ErrorCode::InvalidArgument, "p must exceed d + 2");
}

}  // namespace

LipschitzProfile run_lipschitz(const CoefficientField& a, const ScaleParams& scale, const ProfileOptions& opt) {
  check_profile_options(a, opt);
  const SpaceTimeMesh mesh = resolved_mesh(opt.d, scale, opt.T, opt.policy);
  check_resolution(mesh, scale, opt.policy);
  CylinderQuadrature q(mesh, opt.anchor, lipschitz_radii(scale, opt.R, opt.n_radii), 1);
  const SpaceTimeFn F = rate_source(opt.d);
  IvpMarcher ue(streamed(oscillating_problem(a, scale, F, zero_data())), mesh, opt.scheme);
  for (;;) {
    if (q.wants(ue.level())) {
      q.add(ue.level(), {ue.current()});
      q.add_source(ue.level(), F, opt.p);
    }
    if (ue.level() == mesh.nt) break;
    ue.step();
  }
  return lipschitz_from_quadrature(q, opt.p);
}

LipschitzProfile corrected_affine_profile(const CoefficientField& a, const ScaleParams& scale,
                                          const ProfileOptions& opt) {
  check_profile_options(a, opt);
  const double lambda = scale.lambda();
  const CorrectorSet chi = solve_parabolic_corrector(a, lambda, opt.cell.grid_for(lambda), opt.tol);
  const SpaceTimeMesh mesh = resolved_mesh(opt.d, scale, opt.T, opt.policy);
  CylinderQuadrature q(mesh, opt.anchor, lipschitz_radii(scale, opt.R, opt.n_radii), 1);
  CorrectedPolynomialBasis basis(mesh, scale, chi, nullptr, 1);
  for (int n = 0; n <= mesh.nt; ++n) {
    if (!q.wants(n)) continue;
    basis.evaluate(n);
    q.add(n, {basis.values(0)});
  }
  return lipschitz_from_quadrature(q, opt.p);
}

std::vector<double> excess_radii(const ScaleParams& scale, double R, int n_radii) {
  const double lo = 4.0 * scale.delta(), hi = R / 4.0;
  if (!(lo < hi)) {
    std::ostringstream os;
    os << "excess radii need 4 (eps + eps^(k/2)) = " << lo << " below R/4 = " << hi;
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
  if (n_radii < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 radii");
  std::vector<double> r(n_radii);
  for (int i = 0; i < n_radii; ++i) r[i] = lo * std::pow(hi / lo, double(i) / (n_radii - 1));
  r.back() = hi;
  return r;
}

ExcessProfile run_excess(const CoefficientField& a, const ScaleParams& scale, const ProfileOptions& opt, int order) {
  check_profile_options(a, opt);
  if (order != 1 && order != 2) throw Error(ErrorCode::InvalidArgument, "order must be 1 or 2");
  const double lambda = scale.lambda();
  const CellGrid grid = opt.cell.grid_for(lambda);
  const CorrectorSet chi = solve_parabolic_corrector(a, lambda, grid, opt.tol);
  const CoefficientField a_lambda = rescale_lambda(a, lambda);
  const EffectiveTensor ahat = tensor_from_correctors(a_lambda, chi, Provenance::Lambda, lambda, a.mu(), 0);
  std::optional<SecondCorrectorSet> chi2;
  if (order == 2) chi2 = solve_second_correctors(a, lambda, chi, compute_flux(a, lambda, chi, ahat), opt.tol);

  const SpaceTimeMesh mesh = resolved_mesh(opt.d, scale, opt.T, opt.policy);
  check_resolution(mesh, scale, opt.policy);
  CorrectedPolynomialBasis basis(mesh, scale, chi, chi2 ? &*chi2 : nullptr, order);
  CylinderQuadrature quad(mesh, opt.anchor, excess_radii(scale, opt.R, opt.n_radii), basis.size() + 1);

  using std::numbers::pi;
  const double rate = opt.d * pi * pi * ahat.matrix(0, 0);
  const int d = opt.d;
  const SpaceTimeFn data = [rate, d](const Point& x, double t) {
    double prod = std::exp(-rate * t) * std::sin(pi * x[0]);
    if (d == 2) prod *= std::sin(pi * x[1]);
    return x[0] + prod;
  };
  IvpMarcher ue(oscillating_problem(a, scale, nullptr, data), mesh, opt.scheme);
  for (;;) {
    const int n = ue.level();
    if (quad.wants(n)) {
      basis.evaluate(n);
      std::vector<std::span<const double>> f{ue.current()};
      for (int b = 0; b < basis.size(); ++b) f.push_back(basis.values(b));
      quad.add(n, f);
    }
    if (n == mesh.nt) break;
    ue.step();
  }
  return excess_from_quadrature(quad, basis, &ahat.matrix, order);
}

}  // namespace parahom
