#include "parahom/ivp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "parahom/error.hpp"
#include "parahom/linalg.hpp"

namespace parahom {

const char* to_string(Scheme s) {
  return s == Scheme::CrankNicolson ? "crank-nicolson" : "implicit-euler";
}

IVProblem oscillating_problem(const CoefficientField& a, const ScaleParams& scale, SpaceTimeFn source,
                              SpaceTimeFn boundary) {
  IVProblem p;
  p.coefficient = a;
  p.scale = scale;
  p.source = std::move(source);
  p.boundary = std::move(boundary);
  return p;
}

IVProblem homogenized_problem(const Matrix& tensor, SpaceTimeFn source, SpaceTimeFn boundary) {
  IVProblem p;
  p.tensor = tensor;
  p.source = std::move(source);
  p.boundary = std::move(boundary);
  return p;
}

void check_resolution(const SpaceTimeMesh& mesh, const ScaleParams& scale, const ResolutionPolicy& policy) {
  const double eps = scale.epsilon;
  const double h_max = eps / policy.points_per_eps;
  const double tau_max = std::min(eps * eps, std::pow(eps, scale.k)) / policy.steps_per_scale;
  if (mesh.h() > h_max * (1.0 + 1e-12) || mesh.tau() > tau_max * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "mesh h = " << mesh.h() << ", tau = " << mesh.tau() << " violates h <= " << h_max
       << ", tau <= " << tau_max << " for eps = " << eps << ", k = " << scale.k;
    throw Error(ErrorCode::ResolutionPolicyViolated, os.str());
  }
}

SpaceTimeMesh resolved_mesh(int d, const ScaleParams& scale, double T, const ResolutionPolicy& policy) {
  const double eps = scale.epsilon;
  int nx = int(std::ceil(policy.points_per_eps / eps - 1e-9));
  const double inv = 1.0 / eps;
  if (std::abs(inv - std::round(inv)) < 1e-9) {
    const int m = int(std::round(inv));
    nx = (nx + m - 1) / m * m;
  }
  const double tau_max = std::min(eps * eps, std::pow(eps, scale.k)) / policy.steps_per_scale;
  const int nt = int(std::ceil(T / tau_max - 1e-9));
  return SpaceTimeMesh(d, nx, std::max(nt, 4), T);
}

// ---------------------------------------------------------------------------

struct IvpMarcher::Impl {
  IVProblem problem;
  SpaceTimeMesh mesh;
  Scheme scheme;
  double cg_tol;
  int n = 0;
  std::vector<double> u, rhs, work, delta;
  // Face coefficients: face[ax][node] couples node and node + e_ax.
  std::vector<std::vector<double>> face;
  double mixed = 0.0;  // off-diagonal entry of a constant tensor (d = 2)
  int period_nodes = 0;  // spatial period of the coefficient in nodes, 0 if none
  std::vector<char> is_bnd;
  std::vector<double> steady_source;
  double dmin = std::numeric_limits<double>::infinity();
  double dmax = -std::numeric_limits<double>::infinity();

  Impl(const IVProblem& p, const SpaceTimeMesh& m, Scheme s, double tol)
      : problem(p), mesh(m), scheme(s), cg_tol(tol) {
    if (!problem.boundary) throw Error(ErrorCode::InvalidArgument, "problem needs boundary data");
    const bool osc = problem.coefficient.has_value();
    if (osc == problem.tensor.has_value())
      throw Error(ErrorCode::InvalidArgument, "problem needs exactly one of coefficient or tensor");
    const std::size_t size = mesh.level_size();
    u.assign(size, 0.0);
    rhs.assign(size, 0.0);
    work.assign(size, 0.0);
    delta.assign(size, 0.0);
    face.assign(mesh.d, std::vector<double>(size, 0.0));
    if (osc) {
      if (!problem.scale) throw Error(ErrorCode::InvalidArgument, "oscillating problem needs a scale");
      if (problem.coefficient->d() != mesh.d) throw Error(ErrorCode::MeshMismatch, "coefficient dimension");
      if (!problem.coefficient->diagonal())
        throw Error(ErrorCode::UnsupportedCoefficient, "IVP solver requires a diagonal coefficient");
      if (problem.lambda_form) problem.coefficient = rescale_lambda(*problem.coefficient, problem.scale->lambda());
      const double per = mesh.nx * problem.scale->epsilon;
      if (std::abs(per - std::round(per)) < 1e-9 && std::round(per) >= 1.0) period_nodes = int(std::round(per));
    } else {
      const Matrix& t = *problem.tensor;
      if (t.rows() != mesh.d) throw Error(ErrorCode::MeshMismatch, "tensor dimension");
      for (int ax = 0; ax < mesh.d; ++ax) std::fill(face[ax].begin(), face[ax].end(), t(ax, ax));
      if (mesh.d == 2) mixed = 0.5 * (t(0, 1) + t(1, 0));
    }
    const int n2 = mesh.d == 2 ? mesh.nx + 1 : 1;
    is_bnd.assign(size, 0);
    for (int i2 = 0; i2 < n2; ++i2)
      for (int i1 = 0; i1 <= mesh.nx; ++i1) is_bnd[mesh.node(i1, i2)] = mesh.boundary(i1, i2);
    if (problem.source && problem.source_steady) {
      steady_source.assign(size, 0.0);
      for (int i2 = 0; i2 < n2; ++i2)
        for (int i1 = 0; i1 <= mesh.nx; ++i1)
          steady_source[mesh.node(i1, i2)] = problem.source(Point{mesh.x(i1), mesh.d == 2 ? mesh.x(i2) : 0.0}, 0.0);
    }
    for (int i2 = 0; i2 < n2; ++i2)
      for (int i1 = 0; i1 <= mesh.nx; ++i1) {
        const double v = problem.boundary(Point{mesh.x(i1), mesh.d == 2 ? mesh.x(i2) : 0.0}, 0.0);
        u[mesh.node(i1, i2)] = v;
        dmin = std::min(dmin, v);
        dmax = std::max(dmax, v);
      }
  }

  // Coefficient argument: (x / eps, t / eps^k), or (x / eps, t / eps^2) in
  // the lambda form.
  void update_faces(double t) {
    if (!problem.coefficient) return;
    const CoefficientField& a = *problem.coefficient;
    const double eps = problem.scale->epsilon;
    const double s = problem.lambda_form ? t / (eps * eps) : t / std::pow(eps, problem.scale->k);
    const int nx = mesh.nx;
    const double h = mesh.h();
    const int n2 = mesh.d == 2 ? nx + 1 : 1;
    if (period_nodes > 0) {
      const int P = period_nodes;
      const int q2 = mesh.d == 2 ? P : 1;
      std::vector<std::vector<double>> table(mesh.d, std::vector<double>(std::size_t(P) * q2));
      for (int j2 = 0; j2 < q2; ++j2) {
        for (int j1 = 0; j1 < P; ++j1) {
          const double y1 = j1 * h / eps, y2 = j2 * h / eps;
          table[0][j1 + P * j2] = a(Point{y1 + 0.5 * h / eps, y2}, s)(0, 0);
          if (mesh.d == 2) table[1][j1 + P * j2] = a(Point{y1, y2 + 0.5 * h / eps}, s)(1, 1);
        }
      }
      for (int i2 = 0; i2 < n2; ++i2)
        for (int i1 = 0; i1 <= nx; ++i1) {
          const std::size_t k = std::size_t(i1 % P) + std::size_t(P) * std::size_t(mesh.d == 2 ? i2 % P : 0);
          for (int ax = 0; ax < mesh.d; ++ax) face[ax][mesh.node(i1, i2)] = table[ax][k];
        }
      return;
    }
    for (int i2 = 0; i2 < n2; ++i2)
      for (int i1 = 0; i1 <= nx; ++i1) {
        const double y1 = mesh.x(i1) / eps, y2 = mesh.x(i2) / eps;
        face[0][mesh.node(i1, i2)] = a(Point{y1 + 0.5 * h / eps, y2}, s)(0, 0);
        if (mesh.d == 2) face[1][mesh.node(i1, i2)] = a(Point{y1, y2 + 0.5 * h / eps}, s)(1, 1);
      }
  }

  // out = L v on interior nodes, 0 on boundary nodes.
  void apply_L(std::span<const double> v, std::span<double> out) const {
    const int nx = mesh.nx;
    const double inv_h2 = 1.0 / (mesh.h() * mesh.h());
    if (mesh.d == 1) {
      out[0] = out[nx] = 0.0;
      const auto& a = face[0];
      for (int i = 1; i < nx; ++i)
        out[i] = -(a[i] * (v[i + 1] - v[i]) - a[i - 1] * (v[i] - v[i - 1])) * inv_h2;
      return;
    }
    const auto& ax = face[0];
    const auto& ay = face[1];
    const std::size_t row = std::size_t(nx + 1);
    for (int i2 = 0; i2 <= nx; ++i2) {
      for (int i1 = 0; i1 <= nx; ++i1) {
        const std::size_t k = mesh.node(i1, i2);
        if (mesh.boundary(i1, i2)) {
          out[k] = 0.0;
          continue;
        }
        double r = -(ax[k] * (v[k + 1] - v[k]) - ax[k - 1] * (v[k] - v[k - 1])) -
                   (ay[k] * (v[k + row] - v[k]) - ay[k - row] * (v[k] - v[k - row]));
        if (mixed != 0.0)
          r -= 0.5 * mixed * (v[k + row + 1] - v[k - row + 1] - v[k + row - 1] + v[k - row - 1]);
        out[k] = r * inv_h2;
      }
    }
  }

  void step() {
    const double tau = mesh.tau();
    const double theta = scheme == Scheme::CrankNicolson ? 0.5 : 1.0;
    const double t_new = mesh.t(n + 1);
    const double t_eval = mesh.t(n) + theta * tau;
    update_faces(t_eval);
    const int nx = mesh.nx;
    const int n2 = mesh.d == 2 ? nx + 1 : 1;

    // rhs = u/tau - (1 - theta) L u + F on the interior.
    apply_L(u, work);
    for (int i2 = 0; i2 < n2; ++i2)
      for (int i1 = 0; i1 <= nx; ++i1) {
        const std::size_t k = mesh.node(i1, i2);
        if (is_bnd[k]) {
          rhs[k] = 0.0;
          continue;
        }
        double f = 0.0;
        if (!steady_source.empty()) f = steady_source[k];
        else if (problem.source) f = problem.source(Point{mesh.x(i1), mesh.d == 2 ? mesh.x(i2) : 0.0}, t_eval);
        rhs[k] = u[k] / tau - (1.0 - theta) * work[k] + f;
      }
    // New boundary values; interior guess is the old level.
    for (int i2 = 0; i2 < n2 && !problem.boundary_zero; ++i2)
      for (int i1 = 0; i1 <= nx; ++i1) {
        if (!mesh.boundary(i1, i2)) continue;
        const double v = problem.boundary(Point{mesh.x(i1), mesh.d == 2 ? mesh.x(i2) : 0.0}, t_new);
        u[mesh.node(i1, i2)] = v;
        dmin = std::min(dmin, v);
        dmax = std::max(dmax, v);
      }
    // Residual of the full system, then solve for the interior increment.
    apply_L(u, work);
    for (std::size_t k = 0; k < u.size(); ++k) work[k] = is_bnd[k] ? 0.0 : rhs[k] - (u[k] / tau + theta * work[k]);
    solve_increment(theta, tau);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] += delta[k];
    ++n;
  }

  bool is_boundary(std::size_t k) const { return is_bnd[k] != 0; }

  void solve_increment(double theta, double tau) {
    const int nx = mesh.nx;
    const double inv_h2 = 1.0 / (mesh.h() * mesh.h());
    std::fill(delta.begin(), delta.end(), 0.0);
    if (mesh.d == 1) {
      const int m = nx - 1;
      std::vector<double> sub(m), diag(m), sup(m), b(m);
      const auto& a = face[0];
      for (int r = 0; r < m; ++r) {
        const int i = r + 1;
        sub[r] = -theta * a[i - 1] * inv_h2;
        sup[r] = -theta * a[i] * inv_h2;
        diag[r] = 1.0 / tau + theta * (a[i] + a[i - 1]) * inv_h2;
        b[r] = work[i];
      }
      linalg::solve_tridiagonal(sub, diag, sup, b);
      for (int r = 0; r < m; ++r) delta[r + 1] = b[r];
      return;
    }
    const std::size_t size = u.size();
    std::vector<double> diag(size, 1.0);
    const std::size_t row = std::size_t(nx + 1);
    for (std::size_t k = 0; k < size; ++k) {
      if (is_boundary(k)) continue;
      diag[k] = 1.0 / tau + theta * (face[0][k] + face[0][k - 1] + face[1][k] + face[1][k - row]) * inv_h2;
    }
    auto apply = [&](std::span<const double> v, std::span<double> out) {
      apply_L(v, out);
      for (std::size_t k = 0; k < size; ++k) out[k] = is_boundary(k) ? v[k] : v[k] / tau + theta * out[k];
    };
    const auto stats = linalg::pcg(apply, diag, work, delta, cg_tol, 20000, false);
    if (!stats.converged && stats.residual > 1e3 * cg_tol)
      throw Error(ErrorCode::LinearSolveFailed,
                  "implicit step did not converge (relative residual " + std::to_string(stats.residual) + ")");
  }
};

IvpMarcher::IvpMarcher(const IVProblem& problem, const SpaceTimeMesh& mesh, Scheme scheme, double cg_tol)
    : impl_(std::make_unique<Impl>(problem, mesh, scheme, cg_tol)) {}
IvpMarcher::~IvpMarcher() = default;
IvpMarcher::IvpMarcher(IvpMarcher&&) noexcept = default;
IvpMarcher& IvpMarcher::operator=(IvpMarcher&&) noexcept = default;

const SpaceTimeMesh& IvpMarcher::mesh() const { return impl_->mesh; }
int IvpMarcher::level() const { return impl_->n; }
std::span<const double> IvpMarcher::current() const { return impl_->u; }
void IvpMarcher::step() {
  if (impl_->n >= impl_->mesh.nt) throw Error(ErrorCode::InvalidArgument, "march is past the final time");
  impl_->step();
}
double IvpMarcher::data_min() const { return impl_->dmin; }
double IvpMarcher::data_max() const { return impl_->dmax; }

void march_ivp(const IVProblem& problem, const SpaceTimeMesh& mesh, Scheme scheme, const LevelObserver& observe) {
  IvpMarcher m(problem, mesh, scheme);
  observe(0, m.current());
  while (m.level() < mesh.nt) {
    m.step();
    observe(m.level(), m.current());
  }
}

FieldOnMesh solve_ivp(const IVProblem& problem, const SpaceTimeMesh& mesh, Scheme scheme, int stride, int first,
                      const ResolutionPolicy& policy) {
  if (problem.scale && problem.coefficient) check_resolution(mesh, *problem.scale, policy);
  FieldOnMesh out(mesh, stride, first);
  IvpMarcher m(problem, mesh, scheme);
  const bool check_max = scheme == Scheme::ImplicitEuler && !problem.source;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  auto record = [&]() {
    const int n = m.level();
    const auto cur = m.current();
    if (check_max)
      for (double v : cur) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    if (out.stores(n)) {
      auto dst = out.level((n - first) / stride);
      std::copy(cur.begin(), cur.end(), dst.begin());
    }
  };
  record();
  while (m.level() < mesh.nt) {
    m.step();
    record();
  }
  if (check_max) {
    const double slack = 1e-9 * std::max({1.0, std::abs(m.data_min()), std::abs(m.data_max())});
    if (lo < m.data_min() - slack || hi > m.data_max() + slack) {
      std::ostringstream os;
      os << "discrete maximum principle violated: solution range [" << lo << ", " << hi << "] vs data ["
         << m.data_min() << ", " << m.data_max() << "]";
      throw Error(ErrorCode::LinearSolveFailed, os.str());
    }
  }
  return out;
}

FieldOnMesh solve_homogenized(const IVProblem& problem, const SpaceTimeMesh& mesh, Scheme scheme, int stride,
                              int first) {
  if (!problem.tensor) throw Error(ErrorCode::InvalidArgument, "homogenized problem needs a tensor");
  return solve_ivp(problem, mesh, scheme, stride, first);
}

// ---------------------------------------------------------------------------

PeriodicSampler::PeriodicSampler(const CellField& f) : f_(&f) {}

double PeriodicSampler::operator()(double y1, double y2, double s) const {
  const CellGrid& g = f_->grid();
  auto split = [](double v, int n, int& i0, double& w) {
    double p = v * n;
    p -= std::floor(p / n) * n;
    const double fl = std::floor(p);
    i0 = int(fl) % n;
    w = p - fl;
  };
  int a, b = 0, c;
  double wa, wb = 0.0, wc;
  split(y1, g.n_y, a, wa);
  if (g.d == 2) split(y2, g.n_y, b, wb);
  split(s / g.lambda, g.n_s, c, wc);
  const int a1 = (a + 1) % g.n_y, b1 = (b + 1) % g.n_y, c1 = (c + 1) % g.n_s;
  auto at = [&](int i, int j, int n) { return (*f_)[g.index(i, j, n)]; };
  auto plane = [&](int n) {
    const double lo = (1 - wa) * at(a, b, n) + wa * at(a1, b, n);
    if (g.d == 1) return lo;
    const double hi = (1 - wa) * at(a, b1, n) + wa * at(a1, b1, n);
    return (1 - wb) * lo + wb * hi;
  };
  return wc == 0.0 ? plane(c) : (1 - wc) * plane(c) + wc * plane(c1);
}

namespace {

// Node gradient of one level: centered inside, one-sided on the faces.
void node_gradient(const SpaceTimeMesh& mesh, std::span<const double> v, int axis, std::span<double> out) {
  const int nx = mesh.nx;
  const double h = mesh.h();
  const int n2 = mesh.d == 2 ? nx + 1 : 1;
  for (int i2 = 0; i2 < n2; ++i2)
    for (int i1 = 0; i1 <= nx; ++i1) {
      const int i = axis == 0 ? i1 : i2;
      auto node = [&](int shift) {
        return axis == 0 ? mesh.node(i1 + shift, i2) : mesh.node(i1, i2 + shift);
      };
      double g;
      if (i == 0) g = (v[node(1)] - v[node(0)]) / h;
      else if (i == nx) g = (v[node(0)] - v[node(-1)]) / h;
      else g = (v[node(1)] - v[node(-1)]) / (2 * h);
      out[mesh.node(i1, i2)] = g;
    }
}

}  // namespace

TwoScaleCorrection::TwoScaleCorrection(const FieldOnMesh& u0, const ExpansionCorrectors& correctors,
                                       const ScaleParams& scale, const MollifierSpec& spec,
                                       const CutoffField& cutoff, ExpansionVariant variant)
    : mesh_(u0.mesh()), corr_(correctors), scale_(scale), variant_(variant) {
  if (corr_.chi == nullptr) throw Error(ErrorCode::InvalidArgument, "expansion needs correctors");
  if (variant == ExpansionVariant::WFull && corr_.dual == nullptr)
    throw Error(ErrorCode::InvalidArgument, "full expansion needs dual correctors");
  if (corr_.chi->grid.d != mesh_.d) throw Error(ErrorCode::MeshMismatch, "corrector dimension");
  for (int j = 0; j < mesh_.d; ++j) {
    FieldOnMesh grad(mesh_, u0.stride(), u0.first());
    for (int l = 0; l < u0.levels(); ++l) node_gradient(mesh_, u0.level(l), j, grad.level(l));
    k_.push_back(variant == ExpansionVariant::VEps ? K_eps_tilde(grad, spec, cutoff) : K_eps(grad, spec, cutoff));
  }
}

double TwoScaleCorrection::k_at(int j, std::size_t node, int n) const {
  const FieldOnMesh& k = k_[j];
  const double pos = double(n - k.first()) / k.stride();
  if (pos <= 0.0) return k.level(0)[node];
  const int j0 = std::min(int(std::floor(pos)), k.levels() - 1);
  if (j0 >= k.levels() - 1) return k.level(k.levels() - 1)[node];
  const double w = pos - j0;
  return (1 - w) * k.level(j0)[node] + w * k.level(j0 + 1)[node];
}

void TwoScaleCorrection::add_to(int n, std::span<double> level) const {
  const double eps = scale_.epsilon;
  const double t = mesh_.t(n);
  const double s = t / std::pow(eps, corr_.time_exponent);
  const int nx = mesh_.nx;
  const int n2 = mesh_.d == 2 ? nx + 1 : 1;
  const CorrectorSet& c = *corr_.chi;
  std::vector<PeriodicSampler> chi;
  for (const auto& f : c.chi) chi.emplace_back(f);
  std::vector<std::vector<double>> kval(mesh_.d, std::vector<double>(mesh_.level_size()));
  for (int j = 0; j < mesh_.d; ++j)
    for (std::size_t k = 0; k < mesh_.level_size(); ++k) kval[j][k] = k_at(j, k, n);
  // chi at x / eps repeats with period P nodes when eps * nx is an integer.
  const double per = nx * eps;
  const int P = std::abs(per - std::round(per)) < 1e-9 && per >= 1.0 ? int(std::round(per)) : 0;
  std::vector<std::vector<double>> table;
  if (P > 0) {
    const int q2 = mesh_.d == 2 ? P : 1;
    table.assign(mesh_.d, std::vector<double>(std::size_t(P) * q2));
    for (int j = 0; j < mesh_.d; ++j)
      for (int b = 0; b < q2; ++b)
        for (int a = 0; a < P; ++a) table[j][a + P * b] = chi[j](double(a) / P, double(b) / P, s);
  }
  for (int i2 = 0; i2 < n2; ++i2)
    for (int i1 = 0; i1 <= nx; ++i1) {
      const std::size_t node = mesh_.node(i1, i2);
      for (int j = 0; j < mesh_.d; ++j) {
        const double kv = kval[j][node];
        if (kv == 0.0) continue;
        const double cv = P > 0 ? table[j][std::size_t(i1 % P) + std::size_t(P) * (mesh_.d == 2 ? i2 % P : 0)]
                                : chi[j](mesh_.x(i1) / eps, mesh_.x(i2) / eps, s);
        level[node] += eps * cv * kv;
      }
    }
  if (variant_ != ExpansionVariant::WFull) return;
  const DualCorrectors& dual = *corr_.dual;
  std::vector<double> dk(mesh_.level_size());
  for (int j = 0; j < mesh_.d; ++j) {
    for (int i = 0; i < mesh_.d; ++i) {
      node_gradient(mesh_, kval[j], i, dk);
      const PeriodicSampler phi(dual.phi_time[i][j]);
      for (int i2 = 0; i2 < n2; ++i2)
        for (int i1 = 0; i1 <= nx; ++i1) {
          const std::size_t node = mesh_.node(i1, i2);
          if (dk[node] == 0.0) continue;
          level[node] -= eps * eps * phi(mesh_.x(i1) / eps, mesh_.x(i2) / eps, s) * dk[node];
        }
    }
  }
}

FieldOnMesh two_scale_expansion(const FieldOnMesh& u0, const ExpansionCorrectors& correctors,
                                const ScaleParams& scale, const MollifierSpec& spec, const CutoffField& cutoff,
                                ExpansionVariant variant) {
  const TwoScaleCorrection corr(u0, correctors, scale, spec, cutoff, variant);
  FieldOnMesh out = u0;
  for (int j = 0; j < out.levels(); ++j) corr.add_to(out.level_index(j), out.level(j));
  return out;
}

// ---------------------------------------------------------------------------

double level_l2_squared(const SpaceTimeMesh& mesh, std::span<const double> v) {
  const int nx = mesh.nx;
  const double h = mesh.h();
  auto w = [nx](int i) { return i == 0 || i == nx ? 0.5 : 1.0; };
  double sum = 0.0;
  if (mesh.d == 1) {
    for (int i = 0; i <= nx; ++i) sum += w(i) * v[i] * v[i];
    return sum * h;
  }
  for (int i2 = 0; i2 <= nx; ++i2)
    for (int i1 = 0; i1 <= nx; ++i1) {
      const double x = v[mesh.node(i1, i2)];
      sum += w(i1) * w(i2) * x * x;
    }
  return sum * h * h;
}

double level_h1_squared(const SpaceTimeMesh& mesh, std::span<const double> v) {
  const int nx = mesh.nx;
  const double h = mesh.h();
  double sum = 0.0;
  if (mesh.d == 1) {
    for (int i = 0; i < nx; ++i) sum += (v[i + 1] - v[i]) * (v[i + 1] - v[i]);
    return sum / h;
  }
  // Edge differences with trapezoid weights across the edge direction.
  auto w = [nx](int i) { return i == 0 || i == nx ? 0.5 : 1.0; };
  for (int i2 = 0; i2 <= nx; ++i2)
    for (int i1 = 0; i1 < nx; ++i1) {
      const double dx = v[mesh.node(i1 + 1, i2)] - v[mesh.node(i1, i2)];
      const double dy = v[mesh.node(i2, i1 + 1)] - v[mesh.node(i2, i1)];
      sum += w(i2) * (dx * dx + dy * dy);
    }
  return sum;
}

void DiscrepancyAccumulator::add(int n, std::span<const double> diff) {
  const double l2 = level_l2_squared(mesh_, diff);
  const double h1 = level_h1_squared(mesh_, diff);
  if (last_ >= 0) {
    if (n <= last_) throw Error(ErrorCode::InvalidArgument, "levels must increase");
    const double dt = mesh_.t(n) - mesh_.t(last_);
    l2_ += 0.5 * dt * (l2 + last_l2_);
    h1_ += 0.5 * dt * (h1 + last_h1_);
  }
  last_ = n;
  last_l2_ = l2;
  last_h1_ = h1;
}

Discrepancy DiscrepancyAccumulator::result() const { return {std::sqrt(l2_), std::sqrt(h1_)}; }

Discrepancy discrepancy_norms(const FieldOnMesh& a, const FieldOnMesh& b) {
  if (!a.same_layout(b)) throw Error(ErrorCode::MeshMismatch, "fields live on different meshes or levels");
  DiscrepancyAccumulator acc(a.mesh());
  std::vector<double> diff(a.mesh().level_size());
  for (int j = 0; j < a.levels(); ++j) {
    const auto x = a.level(j), y = b.level(j);
    for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = x[k] - y[k];
    acc.add(a.level_index(j), diff);
  }
  return acc.result();
}

}  // namespace parahom
