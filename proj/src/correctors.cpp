#include "parahom/correctors.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "parahom/effective.hpp"
#include "parahom/error.hpp"
#include "parahom/linalg.hpp"

namespace parahom {

const char* to_string(CorrectorKind kind) {
  switch (kind) {
    case CorrectorKind::Parabolic: return "parabolic-lambda";
    case CorrectorKind::EllipticInfinity: return "elliptic-infinity";
    case CorrectorKind::EllipticZero: return "elliptic-zero";
  }
  return "unknown";
}

namespace {

void require_diagonal(const CoefficientField& a) {
  if (!a.diagonal())
    throw Error(ErrorCode::UnsupportedCoefficient,
                "cell solvers require a diagonal coefficient matrix (got " + a.describe() + ")");
}

void require_period(const CoefficientField& a, const CellGrid& g) {
  if (std::abs(a.time_period() - g.lambda) > 1e-12 * std::max(1.0, g.lambda))
    throw Error(ErrorCode::InvalidArgument, "coefficient period " + std::to_string(a.time_period()) +
                                                " does not match grid lambda " + std::to_string(g.lambda));
}

// a_face[axis][idx]: A_{axis,axis} at the face between node idx and its
// +axis neighbour, at the node's time slice.
using FaceSamples = std::vector<std::vector<double>>;

FaceSamples sample_faces(const CoefficientField& a, const CellGrid& g) {
  FaceSamples out(g.d, std::vector<double>(g.size()));
  const double h = g.h();
  const std::size_t sampled = a.steady() ? g.spatial_size() : g.size();
  for (std::size_t idx = 0; idx < sampled; ++idx) {
    const auto [i1, i2, n] = g.unflatten(idx);
    const Point y{g.y(i1), g.d == 2 ? g.y(i2) : 0.0};
    const Matrix m_x = [&] {
      Point p = y;
      p[0] += 0.5 * h;
      return a(p, g.s(n));
    }();
    out[0][idx] = m_x(0, 0);
    if (g.d == 2) {
      Point p = y;
      p[1] += 0.5 * h;
      out[1][idx] = a(p, g.s(n))(1, 1);
    }
  }
  for (auto& axis : out)
    for (std::size_t idx = sampled; idx < g.size(); ++idx) axis[idx] = axis[idx % sampled];
  return out;
}

// Slice-local operator L u = -sum_axis D-(a D+ u) on slice n.
struct SliceOperator {
  const CellGrid& g;
  const FaceSamples& faces;
  int n;

  std::size_t base() const { return std::size_t(n) * g.spatial_size(); }

  void apply(std::span<const double> u, std::span<double> out, double shift) const {
    const std::size_t sp = g.spatial_size();
    const double inv_h2 = 1.0 / (g.h() * g.h());
    for (std::size_t i = 0; i < sp; ++i) out[i] = shift * u[i];
    for (int ax = 0; ax < g.d; ++ax) {
      const auto& af = faces[ax];
      for (std::size_t i = 0; i < sp; ++i) {
        const std::size_t ip = g.neighbour(i, ax, +1);
        const double flux = af[base() + i] * (u[ip] - u[i]) * inv_h2;
        out[i] -= flux;
        out[ip] += flux;
      }
    }
  }

  std::vector<double> diagonal(double shift) const {
    const std::size_t sp = g.spatial_size();
    const double inv_h2 = 1.0 / (g.h() * g.h());
    std::vector<double> diag(sp, shift);
    for (int ax = 0; ax < g.d; ++ax) {
      for (std::size_t i = 0; i < sp; ++i) {
        const double a = faces[ax][base() + i] * inv_h2;
        diag[i] += a;
        diag[g.neighbour(i, ax, +1)] += a;
      }
    }
    return diag;
  }
};

// div(A e_j) on slice n, i.e. D-_j of the face samples.
void corrector_source(const CellGrid& g, const FaceSamples& faces, int j, CellField& out) {
  const double inv_h = 1.0 / g.h();
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    out[idx] = (faces[j][idx] - faces[j][g.neighbour(idx, j, -1)]) * inv_h;
  }
}

// Solve (shift I + L_n) x = rhs; x holds the initial guess.
void solve_slice(const SliceOperator& op, double shift, std::span<const double> rhs, std::span<double> x,
                 const SolverTolerances& tol) {
  const CellGrid& g = op.g;
  const std::size_t sp = g.spatial_size();
  if (g.d == 1 && shift > 0.0) {
    std::vector<double> sub(sp), diag(sp), sup(sp);
    const double inv_h2 = 1.0 / (g.h() * g.h());
    for (std::size_t i = 0; i < sp; ++i) {
      const double a_minus = op.faces[0][op.base() + (i + sp - 1) % sp] * inv_h2;
      const double a_plus = op.faces[0][op.base() + i] * inv_h2;
      sub[i] = -a_minus;
      sup[i] = -a_plus;
      diag[i] = shift + a_minus + a_plus;
    }
    std::copy(rhs.begin(), rhs.end(), x.begin());
    linalg::solve_cyclic_tridiagonal(sub, diag, sup, x);
    return;
  }
  // Increment form keeps the CG tolerance relative to the correction size.
  std::vector<double> r(sp);
  op.apply(x, r, shift);
  for (std::size_t i = 0; i < sp; ++i) r[i] = rhs[i] - r[i];
  const std::vector<double> diag = op.diagonal(shift);
  std::vector<double> dx(sp, 0.0);
  const bool singular = shift == 0.0;
  auto apply = [&](std::span<const double> u, std::span<double> out) { op.apply(u, out, shift); };
  const auto stats = linalg::pcg(apply, diag, r, dx, tol.cg_tol, tol.max_cg_iter, singular);
  if (!stats.converged && stats.residual > 1e3 * tol.cg_tol)
    throw Error(ErrorCode::NoConvergence, "conjugate gradients stalled at relative residual " +
                                              std::to_string(stats.residual));
  for (std::size_t i = 0; i < sp; ++i) x[i] += dx[i];
}

struct MarchResult {
  CellField x;
  int periods = 0;
  std::vector<double> history;
};

// Time-periodic solution of D-_s x + L x = src by iterating the period map.
MarchResult periodic_march(const CellGrid& g, const FaceSamples& faces, const CellField& src,
                           const SolverTolerances& tol) {
  const std::size_t sp = g.spatial_size();
  const double tau = g.tau();
  MarchResult res{CellField(g), 0, {}};
  std::vector<double> start(sp, 0.0), prev(sp), cur(sp), rhs(sp);
  const double tol_eff = tol.period_tol * std::min(1.0, tau);
  for (int p = 1; p <= tol.max_periods; ++p) {
    prev = start;
    for (int step = 1; step <= g.n_s; ++step) {
      const int m = step % g.n_s;
      auto slice = res.x.slice(m);
      // Warm start from the same slice of the previous period.
      if (p > 1) std::copy(slice.begin(), slice.end(), cur.begin());
      else cur = prev;
      auto s = src.slice(m);
      for (std::size_t i = 0; i < sp; ++i) rhs[i] = prev[i] / tau + s[i];
      solve_slice(SliceOperator{g, faces, m}, 1.0 / tau, rhs, cur, tol);
      std::copy(cur.begin(), cur.end(), slice.begin());
      prev = cur;
    }
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < sp; ++i) {
      diff = std::max(diff, std::abs(cur[i] - start[i]));
      scale = std::max(scale, std::abs(cur[i]));
    }
    start = cur;
    res.history.push_back(diff);
    res.periods = p;
    const double floor = 64.0 * DBL_EPSILON * std::max(scale, 1e-300) * std::sqrt(double(g.n_s));
    if (diff <= std::max(tol_eff, floor)) return res;
  }
  std::ostringstream os;
  os << "period map did not converge within " << tol.max_periods << " periods (last increment "
     << (res.history.empty() ? 0.0 : res.history.back()) << ", target " << tol_eff << ")";
  throw Error(ErrorCode::NoConvergence, os.str());
}

// rms of D-_s x + L x - src over the cell.
double march_residual(const CellGrid& g, const FaceSamples& faces, const CellField& x, const CellField& src,
                      bool include_time) {
  CellField r(g);
  const double inv_h = 1.0 / g.h();
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    double v = include_time ? (x[idx] - x[g.neighbour(idx, g.d, -1)]) / g.tau() : 0.0;
    for (int ax = 0; ax < g.d; ++ax) {
      const std::size_t ip = g.neighbour(idx, ax, +1), im = g.neighbour(idx, ax, -1);
      const double fp = faces[ax][idx] * (x[ip] - x[idx]) * inv_h;
      const double fm = faces[ax][im] * (x[idx] - x[im]) * inv_h;
      v -= (fp - fm) * inv_h;
    }
    r[idx] = v - src[idx];
  }
  return cell_rms(r);
}

void project_slice_means(CellField& f) {
  const CellGrid& g = f.grid();
  for (int n = 0; n < g.n_s; ++n) {
    const double m = slice_mean(f, n);
    for (double& v : f.slice(n)) v -= m;
  }
}

void finalize(CorrectorSet& c) {
  const CellGrid& g = c.grid;
  c.grad_chi.assign(g.d, VectorField{});
  double energy = 0.0;
  for (int i = 0; i < g.d; ++i)
    for (int j = 0; j < g.d; ++j) c.grad_chi[i].push_back(forward_diff(c.chi[j], i));
  for (int j = 0; j < g.d; ++j) {
    double e = 0.0;
    for (int i = 0; i < g.d; ++i) e += cell_rms(c.grad_chi[i][j]) * cell_rms(c.grad_chi[i][j]);
    energy = std::max(energy, e);
  }
  if (!std::isfinite(energy)) throw Error(ErrorCode::NoConvergence, "corrector energy is not finite");
  c.energy_bound = energy;
  for (int j = 0; j < g.d; ++j)
    for (int n = 0; n < g.n_s; ++n)
      if (std::abs(slice_mean(c.chi[j], n)) > 1e-9)
        throw Error(ErrorCode::MeanNotZero, "corrector slice mean is not zero");
}

// Solve the slice elliptic problems L_n chi_j = div(A e_j) with warm starts.
VectorField elliptic_slices(const CellGrid& g, const FaceSamples& faces, const SolverTolerances& tol,
                            int n_slices, double& residual) {
  VectorField chi(g.d, CellField(g));
  residual = 0.0;
  for (int j = 0; j < g.d; ++j) {
    CellField src(g);
    corrector_source(g, faces, j, src);
    std::vector<double> guess(g.spatial_size(), 0.0);
    for (int n = 0; n < n_slices; ++n) {
      auto slice = chi[j].slice(n);
      std::copy(guess.begin(), guess.end(), slice.begin());
      solve_slice(SliceOperator{g, faces, n}, 0.0, src.slice(n), slice, tol);
      guess.assign(slice.begin(), slice.end());
    }
    if (n_slices < g.n_s) {
      for (int n = n_slices; n < g.n_s; ++n) {
        auto slice = chi[j].slice(n);
        std::copy(guess.begin(), guess.end(), slice.begin());
      }
    }
    residual = std::max(residual, march_residual(g, faces, chi[j], src, false));
  }
  return chi;
}

}  // namespace

CorrectorSet solve_parabolic_corrector(const CoefficientField& a, double lambda, const CellGrid& grid,
                                       const SolverTolerances& tol) {
  require_diagonal(a);
  if (!(tol.period_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
  if (std::abs(grid.lambda - lambda) > 1e-12 * std::max(1.0, lambda))
    throw Error(ErrorCode::InvalidArgument, "grid lambda does not match requested lambda");
  const CoefficientField a_lambda = rescale_lambda(a, lambda);
  const FaceSamples faces = sample_faces(a_lambda, grid);
  CorrectorSet c;
  c.grid = grid;
  c.kind = CorrectorKind::Parabolic;
  for (int j = 0; j < grid.d; ++j) {
    CellField src(grid);
    corrector_source(grid, faces, j, src);
    MarchResult m = periodic_march(grid, faces, src, tol);
    project_slice_means(m.x);
    c.residual_norm = std::max(c.residual_norm, march_residual(grid, faces, m.x, src, true));
    c.periods = std::max(c.periods, m.periods);
    if (m.history.size() > c.period_history.size()) c.period_history = m.history;
    c.chi.push_back(std::move(m.x));
  }
  finalize(c);
  return c;
}

CorrectorSet solve_elliptic_corrector_infty(const CoefficientField& a, const CellGrid& grid,
                                            const SolverTolerances& tol) {
  require_diagonal(a);
  require_period(a, grid);
  const FaceSamples faces = sample_faces(a, grid);
  CorrectorSet c;
  c.grid = grid;
  c.kind = CorrectorKind::EllipticInfinity;
  c.chi = elliptic_slices(grid, faces, tol, grid.n_s, c.residual_norm);
  finalize(c);
  return c;
}

CorrectorSet solve_elliptic_corrector_zero(const CoefficientField& a, const CellGrid& grid,
                                           const SolverTolerances& tol) {
  require_diagonal(a);
  const CoefficientField abar = time_average(a, grid.n_s);
  const FaceSamples faces = sample_faces(rescale_lambda(abar, grid.lambda), grid);
  CorrectorSet c;
  c.grid = grid;
  c.kind = CorrectorKind::EllipticZero;
  c.chi = elliptic_slices(grid, faces, tol, 1, c.residual_norm);
  finalize(c);
  return c;
}

Matrix average_flux(const CoefficientField& a_on_grid, const CorrectorSet& c) {
  const CellGrid& g = c.grid;
  const FaceSamples faces = sample_faces(a_on_grid, g);
  Matrix m = Matrix::Zero(g.d, g.d);
  for (int i = 0; i < g.d; ++i) {
    for (int j = 0; j < g.d; ++j) {
      double sum = 0.0;
      const CellField& gc = c.grad_chi[i][j];
      for (std::size_t idx = 0; idx < g.size(); ++idx)
        sum += faces[i][idx] * ((i == j ? 1.0 : 0.0) + gc[idx]);
      m(i, j) = sum / double(g.size());
    }
  }
  return m;
}

FluxField compute_flux(const CoefficientField& a, double lambda, const CorrectorSet& c,
                       const EffectiveTensor& ahat) {
  require_diagonal(a);
  if (c.kind != CorrectorKind::Parabolic)
    throw Error(ErrorCode::InvalidArgument, "flux requires parabolic correctors");
  if (ahat.provenance != Provenance::Lambda || std::abs(ahat.lambda - lambda) > 1e-12 * std::max(1.0, lambda))
    throw Error(ErrorCode::InvalidArgument, "effective tensor provenance does not match lambda");
  const CellGrid& g = c.grid;
  const FaceSamples faces = sample_faces(rescale_lambda(a, lambda), g);
  FluxField flux;
  flux.b.assign(g.d, VectorField(g.d, CellField(g)));
  flux.scale = ahat.matrix.cwiseAbs().maxCoeff();
  for (int i = 0; i < g.d; ++i) {
    for (int j = 0; j < g.d; ++j) {
      CellField& b = flux.b[i][j];
      const CellField& gc = c.grad_chi[i][j];
      for (std::size_t idx = 0; idx < g.size(); ++idx)
        b[idx] = faces[i][idx] * ((i == j ? 1.0 : 0.0) + gc[idx]) - ahat.matrix(i, j);
      const double mean = cell_mean(b);
      if (std::abs(mean) > 1e-9)
        throw Error(ErrorCode::MeanNotZero, "flux component (" + std::to_string(i) + "," + std::to_string(j) +
                                                ") has mean " + std::to_string(mean));
    }
  }
  return flux;
}

DualCorrectors solve_dual_correctors(const FluxField& flux, const CorrectorSet& c, double identity_tol) {
  const CellGrid& g = c.grid;
  const int d = g.d;
  DualCorrectors out;
  out.potentials.assign(d + 1, VectorField{});
  // compute_flux and the corrector solvers already enforce zero means; a
  // flux that is pure solver noise (steady 1D fields) has |mean| ~ rms.
  const double any_mean = std::numeric_limits<double>::infinity();
  for (int j = 0; j < d; ++j) {
    for (int a = 0; a < d; ++a) out.potentials[a].push_back(poisson_spacetime(flux.b[a][j], any_mean));
    out.potentials[d].push_back(poisson_spacetime(-1.0 * c.chi[j], any_mean));
  }
  // phi_kij = D+_k f_ij - D+_i f_kj
  out.phi.assign(d, MatrixField(d, VectorField{}));
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        out.phi[k][i].push_back(forward_diff(out.potentials[i][j], k) - forward_diff(out.potentials[k][j], i));
  // phi_k(d+1)j = D+_k f_(d+1)j - D+_s f_kj
  out.phi_time.assign(d, VectorField{});
  for (int k = 0; k < d; ++k)
    for (int j = 0; j < d; ++j)
      out.phi_time[k].push_back(forward_diff(out.potentials[d][j], k) - forward_diff(out.potentials[k][j], d));

  double b_norm = 0.0, chi_norm = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) b_norm = std::max(b_norm, cell_rms(flux.b[i][j]));
  // A flux that vanishes in exact arithmetic (steady 1D fields) is solver
  // noise; measure it against the tensor instead of against itself.
  b_norm = std::max(b_norm, flux.scale);
  for (int j = 0; j < d; ++j) chi_norm = std::max(chi_norm, cell_rms(c.chi[j]));
  auto relative = [](double r, double scale) { return scale > 0.0 ? r / scale : r; };

  DualResiduals& res = out.residuals;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      CellField rhs = -1.0 * backward_diff(out.phi_time[i][j], d);
      for (int k = 0; k < d; ++k) rhs += backward_diff(out.phi[k][i][j], k);
      res.flux_identity = std::max(res.flux_identity, relative(cell_rms(flux.b[i][j] - rhs), b_norm));
      for (int k = 0; k < d; ++k) {
        const CellField sum = out.phi[k][i][j] + out.phi[i][k][j];
        res.antisymmetry = std::max(res.antisymmetry, max_abs(sum));
      }
    }
  }
  for (int j = 0; j < d; ++j) {
    CellField div(g);
    for (int k = 0; k < d; ++k) div += backward_diff(out.phi_time[k][j], k);
    res.chi_identity = std::max(res.chi_identity, relative(cell_rms(div + c.chi[j]), chi_norm));

    CellField div_b(g);
    for (int i = 0; i < d; ++i) div_b += backward_diff(flux.b[i][j], i);
    const CellField ds_chi = backward_diff(c.chi[j], d);
    // Both sides vanish when chi does not depend on s (product coefficients).
    const double scale = std::max({cell_rms(div_b), cell_rms(ds_chi), b_norm});
    res.divergence = std::max(res.divergence, relative(cell_rms(div_b - ds_chi), scale));
  }
  const double div_tol = 5.0 * (g.h() * g.h() + g.tau());
  if (res.flux_identity > identity_tol || res.chi_identity > identity_tol || res.divergence > div_tol ||
      res.antisymmetry != 0.0) {
    std::ostringstream os;
    os << "dual corrector identities violated: flux " << res.flux_identity << ", chi " << res.chi_identity
       << ", divergence " << res.divergence << ", antisymmetry " << res.antisymmetry;
    throw Error(ErrorCode::IdentityCheckFailed, os.str());
  }
  return out;
}

namespace {

// Right-hand side of the second-order cell problem for the pair (k, l):
// node averages of b_kl + b_lk plus the conservative divergences of
// a_ll chi_k and a_kk chi_l.
CellField second_corrector_source(const CellGrid& g, const FaceSamples& faces, const CorrectorSet& c,
                                  const FluxField& flux, int k, int l) {
  CellField src(g);
  const double inv_h = 1.0 / g.h();
  auto node_avg = [&](const CellField& b, int axis, std::size_t idx) {
    return 0.5 * (b[idx] + b[g.neighbour(idx, axis, -1)]);
  };
  auto div_term = [&](int axis, const CellField& chi, std::size_t idx) {
    const std::size_t ip = g.neighbour(idx, axis, +1), im = g.neighbour(idx, axis, -1);
    const double fp = faces[axis][idx] * 0.5 * (chi[idx] + chi[ip]);
    const double fm = faces[axis][im] * 0.5 * (chi[im] + chi[idx]);
    return (fp - fm) * inv_h;
  };
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    src[idx] = node_avg(flux.b[k][l], k, idx) + node_avg(flux.b[l][k], l, idx) + div_term(l, c.chi[k], idx) +
               div_term(k, c.chi[l], idx);
  }
  return src;
}

}  // namespace

SecondCorrectorSet solve_second_correctors(const CoefficientField& a, double lambda, const CorrectorSet& c,
                                           const FluxField& flux, const SolverTolerances& tol) {
  require_diagonal(a);
  if (c.kind != CorrectorKind::Parabolic)
    throw Error(ErrorCode::InvalidArgument, "second correctors require parabolic first correctors");
  const CellGrid& g = c.grid;
  const FaceSamples faces = sample_faces(rescale_lambda(a, lambda), g);
  SecondCorrectorSet out;
  out.chi2.assign(g.d, VectorField(g.d, CellField(g)));
  for (int k = 0; k < g.d; ++k) {
    for (int l = k; l < g.d; ++l) {
      const CellField src = second_corrector_source(g, faces, c, flux, k, l);
      const double mean = cell_mean(src);
      if (std::abs(mean) > 1e-9 * std::max(1.0, cell_rms(src)))
        throw Error(ErrorCode::NonZeroMean, "second corrector source has mean " + std::to_string(mean));
      MarchResult m = periodic_march(g, faces, src, tol);
      const double full_mean = cell_mean(m.x);
      for (double& v : m.x.values()) v -= full_mean;
      out.residual_norm = std::max(out.residual_norm, march_residual(g, faces, m.x, src, true));
      out.periods = std::max(out.periods, m.periods);
      out.chi2[k][l] = m.x;
      out.chi2[l][k] = std::move(m.x);
    }
  }
  return out;
}

Lemma51Residual lemma51_residual(const CoefficientField& a, double lambda, const CorrectorSet& c,
                                 const SecondCorrectorSet& chi2, const Matrix& ahat) {
  const CellGrid& g = c.grid;
  const int d = g.d;
  const CoefficientField a_lambda = rescale_lambda(a, lambda);
  const FaceSamples faces = sample_faces(a_lambda, g);
  // Node samples for the collocated stencil.
  std::vector<std::vector<double>> nodes(d, std::vector<double>(g.size()));
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    const auto [i1, i2, n] = g.unflatten(idx);
    const Matrix m = a_lambda(Point{g.y(i1), d == 2 ? g.y(i2) : 0.0}, g.s(n));
    for (int ax = 0; ax < d; ++ax) nodes[ax][idx] = m(ax, ax);
  }
  const double h = g.h();

  Lemma51Residual out;
  for (int k = 0; k < d; ++k) {
    for (int l = k; l < d; ++l) {
      // u at the node `idx` displaced by `m` steps along `axis`, with the
      // polynomial part evaluated at unwrapped coordinates.
      auto u_at = [&](std::size_t idx, int axis, int m) {
        const auto [i1, i2, n] = g.unflatten(idx);
        Point y{g.y(i1), d == 2 ? g.y(i2) : 0.0};
        y[axis] += m * h;
        const std::size_t j = g.neighbour(idx, axis, m);
        return y[k] * y[l] + y[k] * c.chi[l][j] + y[l] * c.chi[k][j] + chi2.chi2[k][l][j];
      };
      const double target = ahat(l, k) + ahat(k, l);
      CellField res_c(g), res_s(g);
      for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const std::size_t prev = g.neighbour(idx, d, -1);
        const auto [i1, i2, n] = g.unflatten(idx);
        const Point y{g.y(i1), d == 2 ? g.y(i2) : 0.0};
        const double dt = (y[k] * (c.chi[l][idx] - c.chi[l][prev]) + y[l] * (c.chi[k][idx] - c.chi[k][prev]) +
                           chi2.chi2[k][l][idx] - chi2.chi2[k][l][prev]) /
                          g.tau();
        double collocated = 0.0, conservative = 0.0;
        for (int ax = 0; ax < d; ++ax) {
          const std::size_t ip = g.neighbour(idx, ax, +1), im = g.neighbour(idx, ax, -1);
          const double gp = nodes[ax][ip] * (u_at(idx, ax, 2) - u_at(idx, ax, 0)) / (2.0 * h);
          const double gm = nodes[ax][im] * (u_at(idx, ax, 0) - u_at(idx, ax, -2)) / (2.0 * h);
          collocated += (gp - gm) / (2.0 * h);
          const double fp = faces[ax][idx] * (u_at(idx, ax, 1) - u_at(idx, ax, 0)) / h;
          const double fm = faces[ax][im] * (u_at(idx, ax, 0) - u_at(idx, ax, -1)) / h;
          conservative += (fp - fm) / h;
        }
        res_c[idx] = dt - collocated + target;
        res_s[idx] = dt - conservative + target;
      }
      // Off-diagonal entries of a diagonal-structure tensor are round-off,
      // so every pair is measured against the tensor's size.
      const double scale = 2.0 * ahat.cwiseAbs().maxCoeff();
      const double denom = scale > 0.0 ? scale : 1.0;
      out.relative = std::max(out.relative, cell_rms(res_c) / denom);
      out.consistent = std::max(out.consistent, cell_rms(res_s) / denom);
      if (k == 0 && l == 0) out.mean = cell_mean(res_c);
    }
  }
  return out;
}

double corrector_gradient_distance(const CorrectorSet& a, const CorrectorSet& b) {
  if (!(a.grid == b.grid)) throw Error(ErrorCode::MeshMismatch, "corrector grids differ");
  double sum = 0.0;
  for (int i = 0; i < a.grid.d; ++i)
    for (int j = 0; j < a.grid.d; ++j) {
      const double r = cell_rms(a.grad_chi[i][j] - b.grad_chi[i][j]);
      sum += r * r;
    }
  return std::sqrt(sum);
}

}  // namespace parahom
