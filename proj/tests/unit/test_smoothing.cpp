#include "doctest.h"

#include <cmath>
#include <numbers>

#include "parahom/error.hpp"
#include "parahom/fit.hpp"
#include "parahom/smoothing.hpp"

using namespace parahom;
using std::numbers::pi;

namespace {

FieldOnMesh fill(const SpaceTimeMesh& mesh, auto&& fn, int stride = 1) {
  FieldOnMesh f(mesh, stride);
  const int n2 = mesh.d == 2 ? mesh.nx + 1 : 1;
  for (int j = 0; j < f.levels(); ++j) {
    auto lv = f.level(j);
    for (int i2 = 0; i2 < n2; ++i2)
      for (int i1 = 0; i1 <= mesh.nx; ++i1) lv[mesh.node(i1, i2)] = fn(mesh.x(i1), mesh.x(i2), f.time(j));
  }
  return f;
}

// Direct space-time double sum with freshly evaluated bump samples.
double brute_force(const FieldOnMesh& f, double delta, int i1, int j) {
  const auto& m = f.mesh();
  const double h = m.h(), tau = m.tau();
  double wsum = 0.0, tsum = 0.0;
  for (int i = -100; i <= 100; ++i) wsum += theta1(std::pow(i * h / delta, 2));
  for (int k = 1; k < 1000; ++k) tsum += theta2(-k * tau / (delta * delta));
  double acc = 0.0;
  for (int k = 1; k <= j; ++k) {
    const double wt = theta2(-k * tau / (delta * delta)) / tsum;
    if (wt == 0.0) continue;
    for (int i = -100; i <= 100; ++i) {
      const int a = i1 - i;
      if (a < 0 || a > m.nx) continue;
      acc += wt * theta1(std::pow(i * h / delta, 2)) / wsum * f.level(j - k)[a];
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("bumps") {
  CHECK(theta2(0.0) == 0.0);
  CHECK(theta2(-1.0) == 0.0);
  CHECK(theta2(-0.5) == doctest::Approx(std::exp(-1.0)));
  CHECK(theta1(1.0) == 0.0);
  const auto w = mollifier_weights({0.1}, 1, 0.01, 0.001);
  double s = 0.0;
  for (double v : w.space) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  for (std::size_t k = 0; k < w.space.size(); ++k) CHECK(w.space[k] == w.space[w.space.size() - 1 - k]);
  CHECK_THROWS_AS(mollifier_weights({0.1}, 1, 0.06, 0.001), Error);
  CHECK_THROWS_AS(mollifier_weights({0.1}, 1, 0.01, 0.006), Error);
}

TEST_CASE("constants and linear functions are preserved") {
  const SpaceTimeMesh mesh(1, 100, 200, 0.2);
  const double delta = 0.05;
  const auto c = smooth(fill(mesh, [](double, double, double) { return 3.0; }), {delta});
  const auto lin = smooth(fill(mesh, [](double x, double, double) { return x; }), {delta});
  const auto lin_s = smooth_space_only(fill(mesh, [](double x, double, double) { return x; }), {delta});
  for (int j = 40; j <= mesh.nt; ++j) {
    for (int i = 10; i <= 90; ++i) {
      CHECK(c.level(j)[i] == doctest::Approx(3.0).epsilon(1e-14));
      CHECK(lin.level(j)[i] == doctest::Approx(mesh.x(i)).epsilon(1e-14));
      CHECK(lin_s.level(j)[i] == doctest::Approx(mesh.x(i)).epsilon(1e-14));
    }
  }
}

TEST_CASE("spike matches the brute-force double sum") {
  const SpaceTimeMesh mesh(1, 80, 160, 0.1);
  FieldOnMesh spike(mesh);
  spike.level(20)[40] = 1.0;
  const double delta = 0.06;
  const auto s = smooth(spike, {delta});
  double err = 0.0;
  for (int j = 0; j <= mesh.nt; j += 3)
    for (int i = 0; i <= mesh.nx; ++i) err = std::max(err, std::abs(s.level(j)[i] - brute_force(spike, delta, i, j)));
  CHECK(err <= 1e-14);

  const auto r = fill(mesh, [](double x, double, double t) { return std::sin(7 * x + 3) * std::cos(40 * t) + x * x; });
  const auto sr = smooth(r, {delta});
  err = 0.0;
  for (int j = 0; j <= mesh.nt; j += 7)
    for (int i = 0; i <= mesh.nx; i += 3) err = std::max(err, std::abs(sr.level(j)[i] - brute_force(r, delta, i, j)));
  CHECK(err <= 1e-14);

  // Composition of the split operators.
  const auto comp = smooth_space_only(smooth_time_only(r, {delta}), {delta});
  double diff = 0.0;
  for (std::size_t i = 0; i < comp.values().size(); ++i) diff = std::max(diff, std::abs(comp.values()[i] - sr.values()[i]));
  CHECK(diff == 0.0);
  const auto other = smooth_time_only(smooth_space_only(r, {delta}), {delta});
  diff = 0.0;
  for (std::size_t i = 0; i < comp.values().size(); ++i) diff = std::max(diff, std::abs(other.values()[i] - sr.values()[i]));
  CHECK(diff <= 1e-14);
}

TEST_CASE("positivity and max bound") {
  const SpaceTimeMesh mesh(2, 40, 80, 0.1);
  const auto f = fill(mesh, [](double x, double y, double t) { return std::abs(std::sin(9 * x * y + 20 * t)); });
  const auto s = smooth(f, {0.1});
  for (double v : s.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-14);
  }
}

TEST_CASE("cutoff") {
  const SpaceTimeMesh mesh(1, 1000, 100, 1.0);
  CHECK(cutoff_value(1, 0.01, 0.5, 0.0, 0.5) == 1.0);
  CHECK(cutoff_value(1, 0.01, 0.02, 0.0, 0.5) == 0.0);
  CHECK(cutoff_value(2, 0.01, 0.5, 0.985, 0.5) == 0.0);
  CHECK(cutoff_value(1, 0.01, 0.5, 0.0, 4e-4) == 0.0);
  CHECK_THROWS_AS(build_cutoff(mesh, 0.2), Error);
  CHECK_THROWS_AS(build_cutoff(SpaceTimeMesh(1, 64, 64, 0.01), 0.05), Error);
  const auto c = build_cutoff(SpaceTimeMesh(2, 400, 16, 1.0), 0.05);
  CHECK(c.gradient_constant <= 4.0);
  CHECK(c.gradient_constant > 1.0);
  for (double v : c.eta.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("K operators") {
  const SpaceTimeMesh mesh(1, 200, 400, 0.2);
  const double delta = 0.04;
  const auto cut = build_cutoff(mesh, delta);
  const auto one = fill(mesh, [](double, double, double) { return 1.0; });
  const auto k1 = K_eps(one, {delta}, cut);
  CHECK(k1.level(mesh.nt)[100] == doctest::Approx(1.0).epsilon(1e-14));
  const auto kt = K_eps_tilde(one, {delta}, cut);
  CHECK(kt.level(mesh.nt)[100] == doctest::Approx(1.0).epsilon(1e-14));
  // Support inside the 2 delta layer is annihilated.
  const auto edge = fill(mesh, [&](double x, double, double) { return x < 2 * delta ? 1.0 : 0.0; });
  for (double v : K_eps(edge, {delta}, cut).values()) CHECK(v == 0.0);
  // Far from the parabolic boundary K_eps equals plain smoothing.
  const auto r = fill(mesh, [](double x, double, double t) { return std::cos(5 * x) * (1 + t); });
  const auto kr = K_eps(r, {delta}, cut), sr = smooth(r, {delta});
  for (int j = 0; j <= mesh.nt; ++j) {
    if (mesh.t(j) < 17 * delta * delta) continue;
    for (int i = 0; i <= mesh.nx; ++i) {
      const double dist = std::min(mesh.x(i), 1 - mesh.x(i));
      if (dist > 4 * delta) CHECK(kr.level(j)[i] == doctest::Approx(sr.level(j)[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("commutator decays with delta") {
  const SpaceTimeMesh mesh(1, 400, 1600, 0.1);
  auto gf = [](double x, double, double t) {
    return (1 + 0.5 * std::sin(2 * pi * x) * std::cos(t)) * pi * std::cos(pi * x) * std::exp(-t);
  };
  const auto f = fill(mesh, gf);
  std::vector<double> deltas, errs;
  for (double delta : {0.1, 0.05, 0.025, 0.0125}) {
    const auto s = smooth(f, {delta});
    double sum = 0.0;
    for (int j = 0; j <= mesh.nt; ++j) {
      if (mesh.t(j) < 0.05) continue;
      for (int i = 100; i <= 300; ++i) sum += std::pow(s.level(j)[i] - f.level(j)[i], 2);
    }
    deltas.push_back(delta);
    errs.push_back(std::sqrt(sum * mesh.h() * mesh.tau()));
  }
  const double slope = fit_loglog(deltas, errs).slope;
  MESSAGE("commutator slope " << slope);
  CHECK(slope >= 0.9);
}

TEST_CASE("layer norm") {
  const SpaceTimeMesh mesh(1, 100, 100, 1.0);
  const auto lin = fill(mesh, [](double x, double, double) { return x; });
  CHECK(layer_norm(lin, 0.1, LayerQuantity::Gradient) == doctest::Approx(0.45607017003965516).epsilon(1e-12));
  CHECK(layer_norm(FieldOnMesh(mesh), 0.1, LayerQuantity::Value) == 0.0);

  const SpaceTimeMesh fine(1, 400, 1600, 1.0);
  const auto g = fill(fine, [](double x, double, double t) { return std::sin(pi * x) * (1 + t); });
  std::vector<double> rhos, norms;
  for (double rho : {0.2, 0.1, 0.05, 0.025}) {
    rhos.push_back(rho);
    norms.push_back(layer_norm(g, rho, LayerQuantity::Gradient));
  }
  const double slope = fit_loglog(rhos, norms).slope;
  MESSAGE("layer slope " << slope);
  CHECK(slope >= 0.45);
}
