#pragma once

// Space-time mollification S_delta, its spatial part, the boundary-layer
// cutoff eta_delta and masked layer norms.
//
// The mollifier is phi_delta(y, s) = delta^{-d-2} theta1(y / delta) theta2(s / delta^2)
// with theta2 supported in (-1, 0).  Convolution samples f at t - sigma with
// sigma in (0, delta^2): the smoothed value at time t only reads the past.

#include <array>
#include <vector>

#include "parahom/mesh.hpp"

namespace parahom {

struct MollifierSpec {
  double delta = 0.1;
};

// Discrete weights of the mollifier on a given mesh, each family normalized
// to unit sum.  space[k] pairs with offsets[k] (in nodes, per axis);
// time[m] multiplies f(t - m * tau_stored).
struct MollifierWeights {
  int d = 1;
  int radius = 0;  // spatial offsets satisfy |offset| h < delta
  std::vector<std::array<int, 2>> offsets;
  std::vector<double> space;
  std::vector<double> time;
};

// theta1(y) proportional to exp(-1 / (1 - |y|^2)) on |y| < 1 (unnormalized).
double theta1(double r2);
// theta2(s) proportional to exp(-1 / (1 - (2s + 1)^2)) on (-1, 0) (unnormalized).
double theta2(double s);

// Throws UnderResolvedMollifier unless h <= delta/2 (and tau <= delta^2/2 when
// temporal weights are requested).
MollifierWeights mollifier_weights(const MollifierSpec& spec, int d, double h, double tau, bool with_time = true);

// Values outside the mesh (and before the first stored level) count as zero.
FieldOnMesh smooth(const FieldOnMesh& f, const MollifierSpec& spec);
FieldOnMesh smooth_space_only(const FieldOnMesh& f, const MollifierSpec& spec);
FieldOnMesh smooth_time_only(const FieldOnMesh& f, const MollifierSpec& spec);

// eta_delta as a product of smoothstep ramps: each spatial factor rises from
// 0 at distance 2 delta to 1 at 3 delta from the faces, the temporal factor
// from 0 at t = 4 delta^2 to 1 at t = 9 delta^2.
double cutoff_value(int d, double delta, double x1, double x2, double t);

struct CutoffField {
  FieldOnMesh eta;
  double delta = 0.0;
  // Measured max over stored levels of |grad eta| times delta.
  double gradient_constant = 0.0;
};

// Cutoff sampled on the layout (mesh, stride, first) of `like`.  Throws
// DeltaTooLarge unless 3 delta < 1/2 and 9 delta^2 < T.
CutoffField build_cutoff(const FieldOnMesh& like, double delta);
CutoffField build_cutoff(const SpaceTimeMesh& mesh, double delta);

// K_eps(f) = S_delta(eta f) and its space-only variant S1_delta(eta f).
FieldOnMesh K_eps(const FieldOnMesh& f, const MollifierSpec& spec, const CutoffField& cutoff);
FieldOnMesh K_eps_tilde(const FieldOnMesh& f, const MollifierSpec& spec, const CutoffField& cutoff);

enum class LayerQuantity { Value, Gradient };

// L2 norm of g (or of its spatial gradient) over the boundary layer
// Omega_{T,rho} = {dist(x, boundary) < rho} u {t < rho^2}.  Cell-midpoint
// quadrature over space-time cells of the stored levels; a cell belongs to
// the layer when its midpoint does.
double layer_norm(const FieldOnMesh& g, double rho, LayerQuantity which);

}  // namespace parahom
