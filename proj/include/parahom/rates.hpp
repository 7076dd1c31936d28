#pragma once

// Convergence-rate experiments: L2 and two-scale H1 errors over eps ladders,
// large-scale Lipschitz profiles and first/second order excess decay.

#include <optional>
#include <string>
#include <vector>

#include "parahom/correctors.hpp"
#include "parahom/effective.hpp"
#include "parahom/fit.hpp"
#include "parahom/ivp.hpp"

namespace parahom {

// Error exponents of the theorems as functions of k.
double predicted_l2_exponent(double k);
double predicted_h1_exponent(double k);
// 0.15, relaxed to 0.2 for k > 2.
double default_slope_tol(double k);

struct RateSample {
  double param = 0.0;
  double error = 0.0;
  bool below_floor = false;
  int nx = 0;  // mesh used, 0 when the sample was supplied directly
  int nt = 0;
};

struct RateReport {
  std::string parameter = "eps";
  std::vector<RateSample> samples;  // sorted by param
  LineFit fit;
  // Pre-asymptotic guard: refit without the largest parameter when r2 < 0.95.
  std::optional<LineFit> refit;
  double predicted_exponent = 0.0;
  double slope_tol = 0.15;
  double floor_tol = 1e-12;
  bool degenerate = false;  // all errors below floor_tol
  bool pass = false;

  // Slope the verdict uses: the refit when the guard fired.
  double slope() const { return refit ? refit->slope : fit.slope; }
};

// OLS of log error against log param over samples above floor_tol.  The
// verdict is one-sided: pass iff slope >= predicted - slope_tol.  Throws
// TooFewSamples for fewer than 3 samples (or fewer than 2 above the floor)
// and AllBelowFloor when no sample clears it.
RateReport fit_rate(std::vector<RateSample> samples, double predicted, double slope_tol, double floor_tol = 1e-12);

// Fixed test problem of the rate runs: F = prod_i sin(pi x_i), f = 0 on the
// parabolic boundary, over (0,1)^d x (0, T).
struct RateOptions {
  int d = 1;
  double T = 0.25;
  Scheme scheme = Scheme::CrankNicolson;
  ResolutionPolicy policy{};
  GridPolicy cell{};  // cell grids for correctors and tensors
  SolverTolerances tol{};
  double slope_tol = -1.0;  // < 0: default_slope_tol(k)
  double floor_tol = 1e-12;
  int threads = 1;
};

SpaceTimeFn rate_source(int d);

// Tensor the homogenized problem uses for a given k: Ahat_inf (k < 2),
// Ahat_lambda at lambda = 1 (k = 2), Ahat_0 (k > 2).
EffectiveTensor branch_tensor(const CoefficientField& a, double k, const GridPolicy& cell,
                              const SolverTolerances& tol = {});

// ||u_eps - u_0||_{L2(Omega_T)} over the ladder.  Throws
// RoughCoefficientRejected for k != 2 without seminorm bounds, and
// TooFewSamples for ladders shorter than 4.
RateReport run_l2_rate(const CoefficientField& a, double k, std::vector<double> eps_ladder, const RateOptions& opt = {});

// ||grad w~_eps|| (k = 2, chi^lambda with lambda = 1, K_eps) or
// ||grad v_eps|| (k != 2, chi^inf or chi^0 at t/eps^k, space-only K~_eps),
// with delta = eps + eps^(k/2).
RateReport run_h1_twoscale_rate(const CoefficientField& a, double k, std::vector<double> eps_ladder,
                                const RateOptions& opt = {});

// Q_r(x0, t0) = B(x0, r) x (t0 - r^2, t0).
struct Anchor {
  Point x{0.5, 0.5};
  double t = -1.0;  // < 0: the final time T
};

// Streaming quadrature over a family of nested cylinders.  Cells whose
// spatial midpoint lies in B(x0, r) enter with weight h^d; stored levels in
// [t0 - r^2, t0] enter with trapezoid weights.  For each radius it
// accumulates the Gram matrix of the cell gradients of the fields passed to
// add(), so that means of |grad u|^2 and least-squares fits against a basis
// come out of one pass.
class CylinderQuadrature {
 public:
  CylinderQuadrature(const SpaceTimeMesh& mesh, const Anchor& anchor, std::vector<double> radii, int fields);

  const std::vector<double>& radii() const { return radii_; }
  double t0() const { return t0_; }
  // True when level n touches some cylinder.
  bool wants(int n) const;
  // fields[f] are the values of field f at mesh level n.
  void add(int n, const std::vector<std::span<const double>>& fields);
  // Adds |F|^p over the cylinders, F evaluated at cell midpoints.
  void add_source(int n, const SpaceTimeFn& F, double p);

  // Mean of grad f_a . grad f_b over Q_r.
  double mean(int r, int a, int b) const;
  double source_mean(int r) const;

 private:
  double time_weight(int r, int n) const;

  SpaceTimeMesh mesh_;
  Anchor anchor_;
  double t0_;
  std::vector<double> radii_;
  int fields_;
  std::vector<std::vector<double>> gram_;  // per radius, fields x fields
  std::vector<double> weight_, source_, source_weight_;
  std::vector<int> first_level_;
  std::vector<std::size_t> cell_nodes_;
  std::vector<int> cell_shell_;
  std::vector<Point> cell_mid_;
};

struct LipschitzProfile {
  std::vector<double> radii;
  std::vector<double> energy;  // (mean over Q_r of |grad u|^2)^(1/2)
  double normalizer = 0.0;     // energy at R + R (mean over Q_R of |F|^p)^(1/p)
  double p = 0.0;
  std::vector<double> ratio;   // energy / normalizer
  double max_ratio = 0.0;
  double flatness = 0.0;       // max energy / min energy - 1
};

// Radii: n_radii geometric points between eps + eps^(k/2) and R.  Throws
// CylinderOutOfDomain unless B(x0, R) lies in (0,1)^d and t0 - R^2 >= 0, and
// InvalidArgument unless p > d + 2 and eps + eps^(k/2) < R.
std::vector<double> lipschitz_radii(const ScaleParams& scale, double R, int n_radii);
void check_cylinder(const SpaceTimeMesh& mesh, const Anchor& anchor, double R);

LipschitzProfile lipschitz_profile(const FieldOnMesh& u, const SpaceTimeFn& F, const ScaleParams& scale,
                                   const Anchor& anchor, double R, double p, int n_radii = 8);
LipschitzProfile lipschitz_from_quadrature(const CylinderQuadrature& q, double p);

// Basis of the corrected polynomial classes on a mesh level:
//   order 1: x_j + eps chi_j(x/eps, t/eps^2)
//   order 2: adds x_k x_l + eps (x_k chi_l + x_l chi_k) + eps^2 chi_kl, k <= l.
// chi lives on a cell of time period lambda and is sampled at (x/eps, t/eps^2).
class CorrectedPolynomialBasis {
 public:
  CorrectedPolynomialBasis(const SpaceTimeMesh& mesh, const ScaleParams& scale, const CorrectorSet& chi,
                           const SecondCorrectorSet* chi2, int order);
  int size() const { return int(values_.size()); }
  // Evaluates every basis function at mesh level n.
  void evaluate(int n);
  std::span<const double> values(int b) const { return values_[b]; }
  // (k, l) of a second-order basis function, or (-1, j) for first order.
  std::pair<int, int> label(int b) const { return labels_[b]; }

 private:
  SpaceTimeMesh mesh_;
  ScaleParams scale_;
  const CorrectorSet* chi_;
  const SecondCorrectorSet* chi2_;
  std::vector<std::vector<double>> values_;
  std::vector<std::pair<int, int>> labels_;
};

struct ExcessProfile {
  int order = 1;
  std::vector<double> radii;
  std::vector<double> excess;  // inf over the class of (mean |grad (u - P)|^2)^(1/2)
  std::vector<double> energy;  // (mean |grad u|^2)^(1/2)
  // Fitted coefficients at each radius: e_j (and e_kl for order 2, in the
  // basis order), plus e_0 = 2 e_kl ahat_kl for order 2.
  std::vector<std::vector<double>> coefficients;
  std::vector<double> e0;
  LineFit decay;  // log excess vs log r over radii with excess > 0
};

// Exact two-pass evaluation on a stored solution (all levels inside Q_R must
// be stored).  order 2 needs chi2 and ahat.
ExcessProfile excess_profile(const FieldOnMesh& u, const CorrectorSet& chi, const SecondCorrectorSet* chi2,
                             const Matrix* ahat, const ScaleParams& scale, const Anchor& anchor,
                             const std::vector<double>& radii, int order);
// Single-pass version from a quadrature fed with [u, basis...]; excess from
// the Gram matrix, exact up to cancellation of order sqrt(eps_mach) |grad u|.
ExcessProfile excess_from_quadrature(const CylinderQuadrature& q, const CorrectedPolynomialBasis& basis,
                                     const Matrix* ahat, int order);

// Profile experiments on Q_R(anchor) for one (eps, k).
struct ProfileOptions {
  int d = 1;
  double T = 0.5;
  Scheme scheme = Scheme::CrankNicolson;
  ResolutionPolicy policy{};
  GridPolicy cell{};
  SolverTolerances tol{};
  Anchor anchor{};
  double R = 0.5;
  double p = 6.0;
  int n_radii = 8;
};

// Profile of u_eps for the rate test problem (F = rate_source, f = 0),
// accumulated while marching.
LipschitzProfile run_lipschitz(const CoefficientField& a, const ScaleParams& scale, const ProfileOptions& opt);

// Profile of the exact corrected affine function x_1 + eps chi^lambda_1(x/eps, t/eps^2),
// lambda = eps^(k-2), with F = 0.
LipschitzProfile corrected_affine_profile(const CoefficientField& a, const ScaleParams& scale,
                                          const ProfileOptions& opt);

// Radii for excess decay: n_radii geometric points on [4 delta, R/4].
std::vector<double> excess_radii(const ScaleParams& scale, double R, int n_radii);

// Excess of the solution of (d_t + L_eps) u = 0 with caloric data
// f = x_1 + exp(-d pi^2 ahat_11 t) prod_i sin(pi x_i), streamed.
ExcessProfile run_excess(const CoefficientField& a, const ScaleParams& scale, const ProfileOptions& opt, int order);

}  // namespace parahom
