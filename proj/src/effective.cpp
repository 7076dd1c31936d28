#include "parahom/effective.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "parahom/error.hpp"
#include "parahom/fit.hpp"
#include "parallel.hpp"

namespace parahom {

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Lambda: return "lambda";
    case Provenance::Infinity: return "infinity";
    case Provenance::Zero: return "zero";
  }
  return "unknown";
}

std::uint64_t fnv1a(const std::string& text, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double ellipticity_certificate(const Matrix& m, std::uint64_t seed) {
  const int d = int(m.rows());
  if (d == 1) return m(0, 0);
  std::vector<Eigen::Vector2d> dirs{{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {1.0, -1.0}};
  std::mt19937_64 rng(seed);
  for (int i = 0; i < 16; ++i) {
    // Angle from the raw 64-bit draw so the probe set is identical everywhere.
    const double angle = 2.0 * std::numbers::pi * double(rng() >> 11) * 0x1.0p-53;
    dirs.emplace_back(std::cos(angle), std::sin(angle));
  }
  double cert = std::numeric_limits<double>::infinity();
  const Eigen::Matrix2d full = m;
  for (const auto& xi : dirs) cert = std::min(cert, xi.dot(full * xi) / xi.squaredNorm());
  return cert;
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::MeshMismatch, "matrix shapes differ");
  return (a - b).norm();
}

namespace {

std::string grid_tag(const CellGrid& g) {
  std::ostringstream os;
  os.precision(17);
  os << "d=" << g.d << ";n_y=" << g.n_y << ";n_s=" << g.n_s << ";lambda=" << g.lambda;
  return os.str();
}

}  // namespace

EffectiveTensor tensor_from_correctors(const CoefficientField& a_on_grid, const CorrectorSet& c,
                                       Provenance provenance, double lambda, double mu,
                                       std::uint64_t digest) {
  EffectiveTensor t;
  t.matrix = average_flux(a_on_grid, c);
  t.provenance = provenance;
  t.lambda = lambda;
  t.corrector_energy = c.energy_bound;
  t.inputs_digest = digest;
  t.probe_seed = kProbeSeed;
  t.mu_cert = ellipticity_certificate(t.matrix, t.probe_seed);
  if (!std::isfinite(t.mu_cert) || t.mu_cert < mu - 1e-6) {
    std::ostringstream os;
    os << "certified ellipticity " << t.mu_cert << " below mu = " << mu << " for " << to_string(provenance)
       << " tensor";
    throw Error(ErrorCode::EllipticityCertFailed, os.str());
  }
  return t;
}

EffectiveTensor effective_lambda(const CoefficientField& a, double lambda, const CellGrid& grid,
                                 const SolverTolerances& tol) {
  return effective_lambda(a, lambda, solve_parabolic_corrector(a, lambda, grid, tol));
}

EffectiveTensor effective_lambda(const CoefficientField& a, double lambda, const CorrectorSet& c) {
  const std::uint64_t digest = fnv1a(a.describe() + "|" + grid_tag(c.grid) + "|lambda");
  return tensor_from_correctors(rescale_lambda(a, lambda), c, Provenance::Lambda, lambda, a.mu(), digest);
}

EffectiveTensor effective_infinity(const CoefficientField& a, const CellGrid& grid, const SolverTolerances& tol) {
  // The slice average of the elliptic tensors does not depend on the period,
  // so the grid's lambda only fixes where the slices sit.
  const CoefficientField a_grid = rescale_lambda(a, grid.lambda / a.time_period());
  const CorrectorSet c = solve_elliptic_corrector_infty(a_grid, grid, tol);
  const std::uint64_t digest = fnv1a(a.describe() + "|" + grid_tag(grid) + "|infinity");
  EffectiveTensor t = tensor_from_correctors(a_grid, c, Provenance::Infinity, 0.0, a.mu(), digest);
  t.lambda = std::numeric_limits<double>::infinity();
  return t;
}

EffectiveTensor effective_zero(const CoefficientField& a, const CellGrid& grid, const SolverTolerances& tol) {
  const CorrectorSet c = solve_elliptic_corrector_zero(a, grid, tol);
  const CoefficientField abar = rescale_lambda(time_average(a, grid.n_s), grid.lambda);
  const std::uint64_t digest = fnv1a(a.describe() + "|" + grid_tag(grid) + "|zero");
  return tensor_from_correctors(abar, c, Provenance::Zero, 0.0, a.mu(), digest);
}

CellGrid GridPolicy::grid_for(double lambda) const {
  if (!(lambda > 0.0)) throw Error(ErrorCode::NonPositiveLambda, "lambda must be positive");
  const int mult = lambda > 1.0 ? std::max(1, int(std::lround(lambda))) : 1;
  return CellGrid(d, n_y, n_s_base * mult, lambda);
}

namespace {

struct SweepPoint {
  Matrix tensor;
  double dist_inf = 0.0, dist_zero = 0.0;
  double corr_inf = 0.0, corr_zero = 0.0;
};


// Slope over the samples in `keep` whose value clears the floor; NaN when
// fewer than two remain.
double ladder_slope(const std::vector<double>& lambdas, const std::vector<double>& values,
                    const std::function<bool(double)>& keep, double floor_tol) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (keep(lambdas[i]) && values[i] > floor_tol) {
      x.push_back(lambdas[i]);
      y.push_back(values[i]);
    }
  }
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  return fit_loglog(x, y).slope;
}

}  // namespace

LambdaSweepReport sweep_lambda(const CoefficientField& a, const std::vector<double>& lambdas_in,
                               const GridPolicy& policy, const SolverTolerances& tol, int threads,
                               double floor_tol) {
  if (!a.smooth())
    throw Error(ErrorCode::RoughCoefficientRejected,
                a.describe() + " has no derivative bounds; lambda asymptotics are only qualitative for it");
  if (lambdas_in.empty()) throw Error(ErrorCode::InvalidArgument, "empty lambda list");
  std::vector<double> lambdas = lambdas_in;
  std::sort(lambdas.begin(), lambdas.end());
  for (double l : lambdas)
    if (!(l > 0.0)) throw Error(ErrorCode::NonPositiveLambda, "lambda must be positive");

  LambdaSweepReport rep;
  rep.lambdas = lambdas;
  const CellGrid base = policy.grid_for(1.0);
  rep.a_infinity = effective_infinity(a, base, tol).matrix;
  rep.a_zero = effective_zero(a, base, tol).matrix;

  std::vector<SweepPoint> points(lambdas.size());
  parallel_for(int(lambdas.size()), threads, [&](int i) {
    const double lambda = lambdas[i];
    const CellGrid grid = policy.grid_for(lambda);
    const CorrectorSet chi = solve_parabolic_corrector(a, lambda, grid, tol);
    const CoefficientField a_lambda = rescale_lambda(a, lambda);
    SweepPoint& p = points[i];
    p.tensor = tensor_from_correctors(a_lambda, chi, Provenance::Lambda, lambda, a.mu(), 0).matrix;
    p.dist_inf = frobenius_distance(p.tensor, rep.a_infinity);
    p.dist_zero = frobenius_distance(p.tensor, rep.a_zero);
    p.corr_inf = corrector_gradient_distance(chi, solve_elliptic_corrector_infty(a_lambda, grid, tol));
    p.corr_zero = corrector_gradient_distance(chi, solve_elliptic_corrector_zero(a, grid, tol));
  });

  bool all_below = true;
  for (const auto& p : points) {
    rep.tensors.push_back(p.tensor);
    rep.distances_to_infinity.push_back(p.dist_inf);
    rep.distances_to_zero.push_back(p.dist_zero);
    rep.corrector_distance_infinity.push_back(p.corr_inf);
    rep.corrector_distance_zero.push_back(p.corr_zero);
    all_below = all_below && p.dist_inf <= floor_tol && p.dist_zero <= floor_tol;
  }
  rep.degenerate = all_below;
  auto high = [](double l) { return l >= 4.0; };
  auto low = [](double l) { return l <= 0.25; };
  rep.slope_high = ladder_slope(lambdas, rep.distances_to_infinity, high, floor_tol);
  rep.slope_low = ladder_slope(lambdas, rep.distances_to_zero, low, floor_tol);
  rep.slope_corrector_high = ladder_slope(lambdas, rep.corrector_distance_infinity, high, floor_tol);
  rep.slope_corrector_low = ladder_slope(lambdas, rep.corrector_distance_zero, low, floor_tol);
  return rep;
}

}  // namespace parahom
