#include "parahom/linalg.hpp"

#include "parahom/error.hpp"

namespace parahom::linalg {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

namespace {

void remove_mean(std::span<double> v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= double(v.size());
  for (double& x : v) x -= m;
}

}  // namespace

SolveStats pcg(const LinearOp& apply, std::span<const double> diagonal, std::span<const double> rhs,
               std::span<double> x, double rel_tol, int max_iter, bool project_mean) {
  const std::size_t n = rhs.size();
  std::vector<double> r(rhs.begin(), rhs.end()), z(n), p(n), q(n);
  if (project_mean) {
    remove_mean(r);
    remove_mean(x);
  }
  const double bnorm = norm2(r);
  SolveStats stats;
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    stats.converged = true;
    return stats;
  }
  apply(x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] -= q[i];
  if (project_mean) remove_mean(r);

  auto precondition = [&](std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = in[i] / diagonal[i];
    if (project_mean) remove_mean(out);
  };

  double rnorm = norm2(r);
  if (rnorm <= rel_tol * bnorm) {
    stats.residual = rnorm / bnorm;
    stats.converged = true;
    return stats;
  }
  precondition(r, z);
  p = z;
  double rz = dot(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    apply(p, q);
    if (project_mean) remove_mean(q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) break;
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    rnorm = norm2(r);
    stats.iterations = it;
    if (rnorm <= rel_tol * bnorm) {
      stats.residual = rnorm / bnorm;
      stats.converged = true;
      if (project_mean) remove_mean(x);
      return stats;
    }
    precondition(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  stats.residual = rnorm / bnorm;
  if (project_mean) remove_mean(x);
  return stats;
}

void solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                       std::span<const double> sup, std::span<double> rhs) {
  const std::size_t n = diag.size();
  std::vector<double> c(n);
  double beta = diag[0];
  if (beta == 0.0) throw Error(ErrorCode::LinearSolveFailed, "zero pivot in tridiagonal solve");
  rhs[0] /= beta;
  for (std::size_t i = 1; i < n; ++i) {
    c[i] = sup[i - 1] / beta;
    beta = diag[i] - sub[i] * c[i];
    if (beta == 0.0) throw Error(ErrorCode::LinearSolveFailed, "zero pivot in tridiagonal solve");
    rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i + 1] * rhs[i + 1];
}

void solve_cyclic_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                              std::span<const double> sup, std::span<double> rhs) {
  const std::size_t n = diag.size();
  const double alpha = sup[n - 1];  // A(n-1, 0)
  const double beta = sub[0];       // A(0, n-1)
  const double gamma = -diag[0];
  std::vector<double> d(diag.begin(), diag.end());
  d[0] -= gamma;
  d[n - 1] -= alpha * beta / gamma;
  solve_tridiagonal(sub, d, sup, rhs);
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = alpha;
  solve_tridiagonal(sub, d, sup, u);
  const double fact = (rhs[0] + beta * rhs[n - 1] / gamma) / (1.0 + u[0] + beta * u[n - 1] / gamma);
  for (std::size_t i = 0; i < n; ++i) rhs[i] -= fact * u[i];
}

}  // namespace parahom::linalg
