#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parahom/coefficients.hpp"
#include "parahom/correctors.hpp"

namespace parahom {

enum class Provenance { Lambda, Infinity, Zero };
const char* to_string(Provenance p);

// A homogenized constant matrix with the data needed to audit it.
struct EffectiveTensor {
  Matrix matrix;
  Provenance provenance = Provenance::Lambda;
  double lambda = 1.0;           // meaningful for Provenance::Lambda
  double mu_cert = 0.0;          // min over probes of xi.A xi / |xi|^2
  double corrector_energy = 0.0; // recorded bound on mean |grad chi|^2
  std::uint64_t inputs_digest = 0;
  std::uint64_t probe_seed = 0;
};

constexpr std::uint64_t kProbeSeed = 20190311;

// Certified lower ellipticity bound over coordinate axes, diagonals and 16
// seeded random unit directions.
double ellipticity_certificate(const Matrix& m, std::uint64_t seed = kProbeSeed);

EffectiveTensor effective_lambda(const CoefficientField& a, double lambda, const CellGrid& grid,
                                 const SolverTolerances& tol = {});
// Same tensor from an already computed chi^lambda.
EffectiveTensor effective_lambda(const CoefficientField& a, double lambda, const CorrectorSet& c);
EffectiveTensor effective_infinity(const CoefficientField& a, const CellGrid& grid,
                                   const SolverTolerances& tol = {});
EffectiveTensor effective_zero(const CoefficientField& a, const CellGrid& grid,
                               const SolverTolerances& tol = {});

// Build an EffectiveTensor around an already computed corrector set.
EffectiveTensor tensor_from_correctors(const CoefficientField& a_on_grid, const CorrectorSet& c,
                                       Provenance provenance, double lambda, double mu,
                                       std::uint64_t digest);

double frobenius_distance(const Matrix& a, const Matrix& b);

// How the time resolution follows lambda during a sweep: n_s = n_s_base for
// lambda <= 1 and round(lambda) * n_s_base above, keeping tau uniform.
struct GridPolicy {
  int d = 1;
  int n_y = 64;
  int n_s_base = 64;
  CellGrid grid_for(double lambda) const;
};

struct LambdaSweepReport {
  std::vector<double> lambdas;
  std::vector<double> distances_to_infinity;
  std::vector<double> distances_to_zero;
  std::vector<Matrix> tensors;
  // Corrector distances ||grad chi^lambda - grad chi^inf(., ./lambda)|| and
  // ||grad chi^lambda - grad chi^0||, measured per lambda.
  std::vector<double> corrector_distance_infinity;
  std::vector<double> corrector_distance_zero;
  double slope_high = 0.0;  // fit over lambda >= 4 of distance to A_inf
  double slope_low = 0.0;   // fit over lambda <= 1/4 of distance to A_0
  double slope_corrector_high = 0.0;
  double slope_corrector_low = 0.0;
  bool degenerate = false;  // every distance below the floor: slopes undefined
  Matrix a_infinity;
  Matrix a_zero;
  std::uint64_t probe_seed = kProbeSeed;
};

// Computes Ahat_lambda for every lambda (in parallel when threads > 1) and
// fits the high/low ladder slopes.  Throws RoughCoefficientRejected for
// coefficients without seminorm bounds.
LambdaSweepReport sweep_lambda(const CoefficientField& a, const std::vector<double>& lambdas,
                               const GridPolicy& policy, const SolverTolerances& tol = {},
                               int threads = 1, double floor_tol = 1e-12);

// Stable 64-bit FNV-1a, used for input digests.
std::uint64_t fnv1a(const std::string& text, std::uint64_t seed = 14695981039346656037ull);

}  // namespace parahom
