#pragma once

// Initial-Dirichlet problems (d_t - div A(x/eps, t/eps^k) grad) u = F on
// Omega_T = (0,1)^d x (0,T), u = f on the parabolic boundary, and their
// homogenized counterparts with a constant tensor.

#include <functional>
#include <memory>
#include <optional>
#include <span>

#include "parahom/coefficients.hpp"
#include "parahom/correctors.hpp"
#include "parahom/mesh.hpp"
#include "parahom/smoothing.hpp"

namespace parahom {

enum class Scheme { ImplicitEuler, CrankNicolson };
const char* to_string(Scheme s);

// (x, t) -> value.  An empty source means F = 0.
using SpaceTimeFn = std::function<double(const Point& x, double t)>;

struct IVProblem {
  // Oscillating problem: coefficient and scale are set.
  std::optional<CoefficientField> coefficient;
  std::optional<ScaleParams> scale;
  // Evaluate A_lambda(x/eps, t/eps^2) instead of A(x/eps, t/eps^k); same
  // operator, used to check the equivalence of the two scalings.
  bool lambda_form = false;
  // Homogenized problem: constant tensor.
  std::optional<Matrix> tensor;
  SpaceTimeFn source;    // F
  bool source_steady = false;  // F independent of t: sampled once
  bool boundary_zero = false;  // f = 0: boundary data never evaluated after t = 0
  SpaceTimeFn boundary;  // f on the lateral boundary and at t = 0
};

IVProblem oscillating_problem(const CoefficientField& a, const ScaleParams& scale, SpaceTimeFn source,
                              SpaceTimeFn boundary);
IVProblem homogenized_problem(const Matrix& tensor, SpaceTimeFn source, SpaceTimeFn boundary);

// h <= eps / points_per_eps and tau <= min(eps^2, eps^k) / steps_per_scale.
struct ResolutionPolicy {
  double points_per_eps = 16.0;
  double steps_per_scale = 8.0;
};

void check_resolution(const SpaceTimeMesh& mesh, const ScaleParams& scale, const ResolutionPolicy& policy = {});

// Smallest mesh satisfying the policy.  nx is rounded up to a multiple of
// 1/eps when that is an integer, so coefficient phases repeat on the mesh.
SpaceTimeMesh resolved_mesh(int d, const ScaleParams& scale, double T, const ResolutionPolicy& policy = {});

// Time marcher holding one level.  step() advances by tau.
class IvpMarcher {
 public:
  IvpMarcher(const IVProblem& problem, const SpaceTimeMesh& mesh, Scheme scheme, double cg_tol = 1e-11);
  ~IvpMarcher();
  IvpMarcher(IvpMarcher&&) noexcept;
  IvpMarcher& operator=(IvpMarcher&&) noexcept;

  const SpaceTimeMesh& mesh() const;
  int level() const;
  std::span<const double> current() const;
  void step();
  // Largest and smallest data value seen on the parabolic boundary so far.
  double data_min() const;
  double data_max() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Observer called with (level index, values) for level 0 and every step.
using LevelObserver = std::function<void(int, std::span<const double>)>;

void march_ivp(const IVProblem& problem, const SpaceTimeMesh& mesh, Scheme scheme, const LevelObserver& observe);

// Full solve storing levels first, first + stride, ...; checks the
// resolution policy for oscillating problems and, for implicit Euler with
// F = 0, the discrete maximum principle.
FieldOnMesh solve_ivp(const IVProblem& problem, const SpaceTimeMesh& mesh, Scheme scheme = Scheme::CrankNicolson,
                      int stride = 1, int first = 0, const ResolutionPolicy& policy = {});
FieldOnMesh solve_homogenized(const IVProblem& problem, const SpaceTimeMesh& mesh,
                              Scheme scheme = Scheme::CrankNicolson, int stride = 1, int first = 0);

// Periodic multilinear interpolation of a cell field at (y, s).
class PeriodicSampler {
 public:
  explicit PeriodicSampler(const CellField& f);
  double operator()(double y1, double y2, double s) const;

 private:
  const CellField* f_;
};

enum class ExpansionVariant { WTilde, VEps, WFull };

// Corrector data for a two-scale expansion.  chi holds chi_j on a cell grid
// whose period matches the time scaling: (x/eps, t/eps^2) for the lambda
// correctors, (x/eps, t/eps^k) for chi^infinity, time-independent chi^0.
struct ExpansionCorrectors {
  const CorrectorSet* chi = nullptr;
  const DualCorrectors* dual = nullptr;  // WFull only
  double time_exponent = 2.0;            // 2 for WTilde / WFull, k for VEps
};

// Smoothed gradient K(grad u0) (or K-tilde for VEps) on u0's stored levels,
// evaluated at any mesh level by linear interpolation in time.
class TwoScaleCorrection {
 public:
  TwoScaleCorrection(const FieldOnMesh& u0, const ExpansionCorrectors& correctors, const ScaleParams& scale,
                     const MollifierSpec& spec, const CutoffField& cutoff, ExpansionVariant variant);

  // Adds eps chi_j K_j (- eps^2 phi_i(d+1)j d_i K_j for WFull) at mesh level n.
  void add_to(int n, std::span<double> level) const;
  const std::vector<FieldOnMesh>& smoothed_gradient() const { return k_; }

 private:
  double k_at(int j, std::size_t node, int n) const;

  SpaceTimeMesh mesh_;
  ExpansionCorrectors corr_;
  ScaleParams scale_;
  ExpansionVariant variant_;
  std::vector<FieldOnMesh> k_;
};

// Returns u0 + the corrector terms on u0's stored levels.
FieldOnMesh two_scale_expansion(const FieldOnMesh& u0, const ExpansionCorrectors& correctors,
                                const ScaleParams& scale, const MollifierSpec& spec, const CutoffField& cutoff,
                                ExpansionVariant variant);

struct Discrepancy {
  double l2 = 0.0;    // ||a - b||_{L2(Omega_T)}, trapezoid in x and t
  double l2h1 = 0.0;  // ||grad (a - b)||_{L2(Omega_T)}, forward differences on cells
};

Discrepancy discrepancy_norms(const FieldOnMesh& a, const FieldOnMesh& b);

// Streaming accumulator for the same norms, fed one level at a time.
class DiscrepancyAccumulator {
 public:
  explicit DiscrepancyAccumulator(const SpaceTimeMesh& mesh) : mesh_(mesh) {}
  // diff = a - b at mesh level n; levels must arrive in increasing order.
  void add(int n, std::span<const double> diff);
  Discrepancy result() const;

 private:
  SpaceTimeMesh mesh_;
  int last_ = -1;
  double last_l2_ = 0.0, last_h1_ = 0.0;
  double l2_ = 0.0, h1_ = 0.0;
};

// Spatial L2 and gradient-squared integrals of one level.
double level_l2_squared(const SpaceTimeMesh& mesh, std::span<const double> v);
double level_h1_squared(const SpaceTimeMesh& mesh, std::span<const double> v);

}  // namespace parahom
