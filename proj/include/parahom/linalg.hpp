#pragma once

// Small linear solvers used by the cell and IVP marchers.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace parahom::linalg {

struct SolveStats {
  int iterations = 0;
  double residual = 0.0;  // relative residual ||b - Ax|| / ||b||
  bool converged = false;
};

using LinearOp = std::function<void(std::span<const double>, std::span<double>)>;

// Jacobi-preconditioned conjugate gradients for a symmetric positive
// (semi-)definite operator.  When `project_mean` is set the iteration runs on
// the mean-zero subspace, which is how singular periodic operators are
// handled.  `x` carries the initial guess on entry.
SolveStats pcg(const LinearOp& apply, std::span<const double> diagonal, std::span<const double> rhs,
               std::span<double> x, double rel_tol, int max_iter, bool project_mean = false);

// Thomas algorithm; sub[0] and sup[n-1] are ignored.
void solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                       std::span<const double> sup, std::span<double> rhs_inout);

// Periodic tridiagonal system: sub[0] couples row 0 to row n-1 and sup[n-1]
// couples row n-1 to row 0.  Sherman-Morrison on top of Thomas.
void solve_cyclic_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                              std::span<const double> sup, std::span<double> rhs_inout);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace parahom::linalg
