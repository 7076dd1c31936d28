#pragma once

// Cell problems on the (1, lambda)-torus.
//
// Discrete layout (MAC-style staggering):
//   chi_j                 nodes (i, n)
//   grad_chi[i][j]        forward difference D+_i chi_j, located on i-faces
//   flux b_ij             on i-faces: a_ii (delta_ij + D+_i chi_j) - ahat_ij
//   potentials f          same locations as the quantity they invert
//   phi_kij, phi_k(d+1)j  forward differences of potentials (edges)
// With this layout the divergence identity sum_i D-_i b_ij = D-_s chi_j is the
// implicit-Euler cell equation itself, and both dual-corrector identities hold
// up to Poisson round-off.

#include <vector>

#include "parahom/coefficients.hpp"
#include "parahom/torus.hpp"

namespace parahom {

enum class CorrectorKind { Parabolic, EllipticInfinity, EllipticZero };
const char* to_string(CorrectorKind kind);

struct SolverTolerances {
  double period_tol = 1e-10;  // ||chi^(n+1)(., 0) - chi^(n)(., 0)||_inf, scaled by min(1, tau)
  double cg_tol = 1e-11;
  int max_periods = 200;
  int max_cg_iter = 5000;
};

struct CorrectorSet {
  CellGrid grid;
  CorrectorKind kind = CorrectorKind::Parabolic;
  VectorField chi;
  MatrixField grad_chi;  // grad_chi[i][j] = D+_i chi_j
  double residual_norm = 0.0;
  // Bound recorded for mean |grad chi_j|^2, max over j.
  double energy_bound = 0.0;
  int periods = 0;
  std::vector<double> period_history;  // period-map increments, one per period
};

struct FluxField {
  MatrixField b;  // b[i][j] on i-faces
  double scale = 0.0;  // max |ahat_ij|: the size identities are measured against
};

struct DualResiduals {
  double flux_identity = 0.0;   // b_ij = D-_k phi_kij - D-_s phi_i(d+1)j, relative rms
  double chi_identity = 0.0;    // -chi_j = D-_k phi_k(d+1)j, relative rms
  double divergence = 0.0;      // D-_i b_ij = D-_s chi_j, relative rms
  double antisymmetry = 0.0;    // max |phi_kij + phi_ikj|
};

struct DualCorrectors {
  // phi[k][i][j] = phi_kij; phi_time[k][j] = phi_k(d+1)j.
  std::vector<MatrixField> phi;
  MatrixField phi_time;
  // potentials[a][j]: a < d gives f_aj, a == d gives f_(d+1)j.
  MatrixField potentials;
  DualResiduals residuals;
};

struct SecondCorrectorSet {
  MatrixField chi2;  // symmetric: chi2[k][l] == chi2[l][k]
  double residual_norm = 0.0;
  int periods = 0;
};

struct EffectiveTensor;

// Time-periodic chi^lambda by period-map iteration of implicit Euler.
CorrectorSet solve_parabolic_corrector(const CoefficientField& a, double lambda, const CellGrid& grid,
                                       const SolverTolerances& tol = {});
// Slice-wise elliptic chi^infinity(y, s) on the grid's time slices.
CorrectorSet solve_elliptic_corrector_infty(const CoefficientField& a, const CellGrid& grid,
                                            const SolverTolerances& tol = {});
// chi^0 for the time-averaged matrix; every slice holds the same field.
CorrectorSet solve_elliptic_corrector_zero(const CoefficientField& a, const CellGrid& grid,
                                           const SolverTolerances& tol = {});

// Average of a_ii (delta_ij + D+_i chi_j) over faces and slices.  The
// coefficient must already live on the corrector grid's time period.
Matrix average_flux(const CoefficientField& a_on_grid, const CorrectorSet& c);

FluxField compute_flux(const CoefficientField& a, double lambda, const CorrectorSet& correctors,
                       const EffectiveTensor& ahat);

DualCorrectors solve_dual_correctors(const FluxField& flux, const CorrectorSet& chi,
                                     double identity_tol = 1e-8);

SecondCorrectorSet solve_second_correctors(const CoefficientField& a, double lambda,
                                           const CorrectorSet& chi, const FluxField& flux,
                                           const SolverTolerances& tol = {});

struct Lemma51Residual {
  double relative = 0.0;     // rms / (2 max_ij |ahat_ij|), max over (k, l)
  double mean = 0.0;         // mean of the residual for the (0, 0) pair
  double consistent = 0.0;   // same residual with the solver's own stencil (round-off level)
};

// Residual of (d_s - div A_lambda grad) u + ahat_lk + ahat_kl for
// u = y_k y_l + y_k chi_l + y_l chi_k + chi_kl.  `relative` uses an
// independent collocated centered stencil, so it measures discretization
// error; `consistent` reuses the conservative stencil of the solves.
Lemma51Residual lemma51_residual(const CoefficientField& a, double lambda, const CorrectorSet& chi,
                                 const SecondCorrectorSet& chi2, const Matrix& ahat);

// ||grad chi^a - grad chi^b||_L2(cell) (normalized), using the face gradients.
double corrector_gradient_distance(const CorrectorSet& a, const CorrectorSet& b);

}  // namespace parahom
