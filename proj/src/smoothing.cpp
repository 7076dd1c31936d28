#include "parahom/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "parahom/error.hpp"

namespace parahom {

double theta1(double r2) { return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0; }

double theta2(double s) {
  if (!(s > -1.0 && s < 0.0)) return 0.0;
  const double u = 2.0 * s + 1.0;
  return std::exp(-1.0 / (1.0 - u * u));
}

MollifierWeights mollifier_weights(const MollifierSpec& spec, int d, double h, double tau, bool with_time) {
  const double delta = spec.delta;
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "mollifier delta must be positive");
  if (h > 0.5 * delta * (1.0 + 1e-12) || (with_time && tau > 0.5 * delta * delta * (1.0 + 1e-12))) {
    std::ostringstream os;
    os << "mollifier with delta = " << delta << " needs h <= delta/2 and tau <= delta^2/2 (h = " << h
       << ", tau = " << tau << ")";
    throw Error(ErrorCode::UnderResolvedMollifier, os.str());
  }
  MollifierWeights w;
  w.d = d;
  w.radius = int(std::ceil(delta / h));
  const int r = w.radius;
  // Weights are evaluated from |offset| only, so theta1(-y) = theta1(y) holds
  // bit for bit.
  for (int j = (d == 2 ? -r : 0); j <= (d == 2 ? r : 0); ++j) {
    for (int i = -r; i <= r; ++i) {
      const double r2 = (double(i) * i + double(j) * j) * (h / delta) * (h / delta);
      const double v = theta1(r2);
      if (v > 0.0) {
        w.offsets.push_back({i, j});
        w.space.push_back(v);
      }
    }
  }
  double sum = 0.0;
  for (double v : w.space) sum += v;
  for (double& v : w.space) v /= sum;
  if (with_time) {
    double tsum = 0.0;
    w.time.push_back(0.0);  // theta2 vanishes at s = 0
    for (int m = 1;; ++m) {
      const double s = -m * tau / (delta * delta);
      if (s <= -1.0) break;
      w.time.push_back(theta2(s));
      tsum += w.time.back();
    }
    for (double& v : w.time) v /= tsum;
  }
  return w;
}

namespace {

FieldOnMesh space_pass(const FieldOnMesh& f, const MollifierWeights& w) {
  const SpaceTimeMesh& mesh = f.mesh();
  FieldOnMesh out(mesh, f.stride(), f.first());
  const int n = mesh.nx + 1;
  const int n2 = mesh.d == 2 ? n : 1;
  for (int j = 0; j < f.levels(); ++j) {
    const auto in = f.level(j);
    auto dst = out.level(j);
    for (int i2 = 0; i2 < n2; ++i2) {
      for (int i1 = 0; i1 < n; ++i1) {
        double acc = 0.0;
        for (std::size_t k = 0; k < w.space.size(); ++k) {
          const int a = i1 - w.offsets[k][0], b = i2 - w.offsets[k][1];
          if (a < 0 || a >= n || b < 0 || b >= n2) continue;
          acc += w.space[k] * in[mesh.node(a, b)];
        }
        dst[mesh.node(i1, i2)] = acc;
      }
    }
  }
  return out;
}

FieldOnMesh time_pass(const FieldOnMesh& f, const MollifierWeights& w) {
  FieldOnMesh out(f.mesh(), f.stride(), f.first());
  const std::size_t size = f.mesh().level_size();
  for (int j = 0; j < f.levels(); ++j) {
    auto dst = out.level(j);
    for (std::size_t m = 1; m < w.time.size() && int(m) <= j; ++m) {
      const auto src = f.level(j - int(m));
      const double c = w.time[m];
      for (std::size_t i = 0; i < size; ++i) dst[i] += c * src[i];
    }
  }
  return out;
}

FieldOnMesh multiply(const FieldOnMesh& f, const FieldOnMesh& eta) {
  if (!f.same_layout(eta)) throw Error(ErrorCode::MeshMismatch, "cutoff layout differs from the field");
  FieldOnMesh out = f;
  auto v = out.values();
  const auto e = eta.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= e[i];
  return out;
}

double smoothstep(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * (3.0 - 2.0 * u);
}

}  // namespace

FieldOnMesh smooth_space_only(const FieldOnMesh& f, const MollifierSpec& spec) {
  return space_pass(f, mollifier_weights(spec, f.mesh().d, f.mesh().h(), f.stored_tau(), false));
}

FieldOnMesh smooth_time_only(const FieldOnMesh& f, const MollifierSpec& spec) {
  const auto w = mollifier_weights(spec, f.mesh().d, std::min(f.mesh().h(), 0.5 * spec.delta), f.stored_tau());
  return time_pass(f, w);
}

FieldOnMesh smooth(const FieldOnMesh& f, const MollifierSpec& spec) {
  const auto w = mollifier_weights(spec, f.mesh().d, f.mesh().h(), f.stored_tau());
  return space_pass(time_pass(f, w), w);
}

double cutoff_value(int d, double delta, double x1, double x2, double t) {
  auto ramp = [delta](double dist) { return smoothstep(dist / delta - 2.0); };
  double eta = ramp(std::min(x1, 1.0 - x1));
  if (d == 2) eta *= ramp(std::min(x2, 1.0 - x2));
  const double d2 = delta * delta;
  return eta * smoothstep((t - 4.0 * d2) / (5.0 * d2));
}

CutoffField build_cutoff(const FieldOnMesh& like, double delta) {
  const SpaceTimeMesh& mesh = like.mesh();
  if (!(delta > 0.0) || !(3.0 * delta < 0.5) || !(9.0 * delta * delta < mesh.T)) {
    std::ostringstream os;
    os << "cutoff needs 3 delta < 1/2 and 9 delta^2 < T (delta = " << delta << ", T = " << mesh.T << ")";
    throw Error(ErrorCode::DeltaTooLarge, os.str());
  }
  CutoffField c;
  c.delta = delta;
  c.eta = FieldOnMesh(mesh, like.stride(), like.first());
  const int n = mesh.nx + 1;
  const int n2 = mesh.d == 2 ? n : 1;
  const double h = mesh.h();
  double grad = 0.0;
  for (int j = 0; j < c.eta.levels(); ++j) {
    auto lv = c.eta.level(j);
    const double t = c.eta.time(j);
    for (int i2 = 0; i2 < n2; ++i2)
      for (int i1 = 0; i1 < n; ++i1) lv[mesh.node(i1, i2)] = cutoff_value(mesh.d, delta, mesh.x(i1), mesh.x(i2), t);
    for (int i2 = 0; i2 < n2; ++i2) {
      for (int i1 = 0; i1 < n; ++i1) {
        double g2 = 0.0;
        if (i1 + 1 < n) g2 += std::pow((lv[mesh.node(i1 + 1, i2)] - lv[mesh.node(i1, i2)]) / h, 2);
        if (mesh.d == 2 && i2 + 1 < n) g2 += std::pow((lv[mesh.node(i1, i2 + 1)] - lv[mesh.node(i1, i2)]) / h, 2);
        grad = std::max(grad, std::sqrt(g2));
      }
    }
  }
  c.gradient_constant = grad * delta;
  return c;
}

CutoffField build_cutoff(const SpaceTimeMesh& mesh, double delta) {
  FieldOnMesh layout(mesh);
  return build_cutoff(layout, delta);
}

FieldOnMesh K_eps(const FieldOnMesh& f, const MollifierSpec& spec, const CutoffField& cutoff) {
  return smooth(multiply(f, cutoff.eta), spec);
}

FieldOnMesh K_eps_tilde(const FieldOnMesh& f, const MollifierSpec& spec, const CutoffField& cutoff) {
  return smooth_space_only(multiply(f, cutoff.eta), spec);
}

double layer_norm(const FieldOnMesh& g, double rho, LayerQuantity which) {
  const SpaceTimeMesh& mesh = g.mesh();
  if (!(rho > 0.0 && rho <= 0.5)) throw Error(ErrorCode::InvalidArgument, "layer width must lie in (0, 1/2]");
  const int nx = mesh.nx;
  const int c2 = mesh.d == 2 ? nx : 1;
  const double h = mesh.h();
  double sum = 0.0;
  for (int j = 0; j + 1 < g.levels(); ++j) {
    const double dt = g.time(j + 1) - g.time(j);
    const double tm = 0.5 * (g.time(j) + g.time(j + 1));
    const auto a = g.level(j), b = g.level(j + 1);
    for (int i2 = 0; i2 < c2; ++i2) {
      for (int i1 = 0; i1 < nx; ++i1) {
        double dist = std::min(mesh.x(i1) + 0.5 * h, 1.0 - mesh.x(i1) - 0.5 * h);
        if (mesh.d == 2) dist = std::min({dist, mesh.x(i2) + 0.5 * h, 1.0 - mesh.x(i2) - 0.5 * h});
        if (!(dist < rho || tm < rho * rho)) continue;
        const double vol = dt * (mesh.d == 2 ? h * h : h);
        double q = 0.0;
        if (mesh.d == 1) {
          if (which == LayerQuantity::Value) {
            q = std::pow(0.25 * (a[i1] + a[i1 + 1] + b[i1] + b[i1 + 1]), 2);
          } else {
            q = std::pow(0.5 * ((a[i1 + 1] - a[i1]) + (b[i1 + 1] - b[i1])) / h, 2);
          }
        } else {
          auto at = [&](std::span<const double> lv, int p, int r) { return lv[mesh.node(i1 + p, i2 + r)]; };
          if (which == LayerQuantity::Value) {
            double s = 0.0;
            for (auto lv : {a, b})
              for (int p = 0; p < 2; ++p)
                for (int r = 0; r < 2; ++r) s += at(lv, p, r);
            q = std::pow(s / 8.0, 2);
          } else {
            double gx = 0.0, gy = 0.0;
            for (auto lv : {a, b}) {
              for (int r = 0; r < 2; ++r) gx += at(lv, 1, r) - at(lv, 0, r);
              for (int p = 0; p < 2; ++p) gy += at(lv, p, 1) - at(lv, p, 0);
            }
            q = std::pow(gx / (4.0 * h), 2) + std::pow(gy / (4.0 * h), 2);
          }
        }
        sum += vol * q;
      }
    }
  }
  return std::sqrt(sum);
}

}  // namespace parahom
