#include "doctest.h"

#include <cmath>

#include "parahom/error.hpp"
#include "parahom/rates.hpp"

using namespace parahom;

TEST_CASE("predicted exponents") {
  CHECK(predicted_l2_exponent(1.0) == 0.5);
  CHECK(predicted_l2_exponent(1.6) == doctest::Approx(0.4));
  CHECK(predicted_l2_exponent(2.0) == 1.0);
  CHECK(predicted_l2_exponent(2.5) == 0.5);
  CHECK(predicted_l2_exponent(3.5) == 1.0);
  CHECK(predicted_h1_exponent(1.0) == 0.25);
  CHECK(predicted_h1_exponent(2.0) == 0.5);
  CHECK(predicted_h1_exponent(2.25) == 0.25);
  // Branches meet at the breakpoints.
  CHECK(predicted_l2_exponent(4.0 / 3.0) == doctest::Approx(2.0 / 3.0));
  CHECK(predicted_l2_exponent(4.0 / 3.0 + 1e-12) == doctest::Approx(2.0 / 3.0));
  CHECK(predicted_l2_exponent(3.0 - 1e-12) == doctest::Approx(1.0));
  CHECK(predicted_h1_exponent(1.6) == doctest::Approx(0.4));
  CHECK(predicted_h1_exponent(1.6 + 1e-12) == doctest::Approx(0.4));
  CHECK(predicted_h1_exponent(2.5 - 1e-12) == doctest::Approx(0.5));
  for (double k : {0.0, -1.0, std::nan("")}) {
    CHECK_THROWS_AS(predicted_l2_exponent(k), Error);
    try {
      predicted_h1_exponent(k);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonPositiveK);
    }
  }
}

namespace {
std::vector<RateSample> samples(std::initializer_list<std::pair<double, double>> v) {
  std::vector<RateSample> out;
  for (auto [p, e] : v) out.push_back({p, e});
  return out;
}
}  // namespace

TEST_CASE("fit_rate") {
  auto r = fit_rate(samples({{1.0 / 8, 0.1}, {1.0 / 16, 0.05}, {1.0 / 32, 0.025}}), 1.0, 0.15);
  CHECK(r.slope() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.pass);
  r = fit_rate(samples({{1.0 / 8, 0.1}, {1.0 / 16, 0.1}, {1.0 / 32, 0.1}}), 0.5, 0.15);
  CHECK(std::abs(r.slope()) < 1e-12);
  CHECK_FALSE(r.pass);
  r = fit_rate(samples({{1.0 / 32, 0.026}, {1.0 / 8, 0.1}, {1.0 / 16, 0.049}}), 1.0, 0.15);
  CHECK(r.samples.front().param == 1.0 / 32);
  CHECK(r.slope() == doctest::Approx(0.97170824).epsilon(1e-7));
  CHECK(r.fit.r2 == doctest::Approx(0.99883667).epsilon(1e-7));
  CHECK_FALSE(r.refit);

  SUBCASE("floor and sample count") {
    auto f = fit_rate(samples({{0.1, 1e-15}, {0.2, 0.2}, {0.4, 0.4}}), 1.0, 0.15);
    CHECK(f.samples[0].below_floor);
    CHECK(f.slope() == doctest::Approx(1.0));
    try {
      fit_rate(samples({{0.1, 1e-15}, {0.2, 0.0}, {0.4, 1e-13}}), 1.0, 0.15);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::AllBelowFloor);
    }
    try {
      fit_rate(samples({{0.1, 1.0}, {0.2, 2.0}}), 1.0, 0.15);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TooFewSamples);
    }
  }
  SUBCASE("pre-asymptotic guard") {
    // Clean slope 1 on the three smallest, a plateau at the largest.
    auto g = fit_rate(samples({{1.0 / 64, 1.0 / 64}, {1.0 / 32, 1.0 / 32}, {1.0 / 16, 1.0 / 16}, {1.0 / 8, 1e-3}}),
                      1.0, 0.15);
    CHECK(g.fit.r2 < 0.95);
    REQUIRE(g.refit);
    CHECK(g.refit->slope == doctest::Approx(1.0));
    CHECK(g.slope() == g.refit->slope);
    CHECK(g.pass);
  }
  SUBCASE("verdict monotone in tolerance") {
    const auto s = samples({{0.1, 0.3}, {0.2, 0.4}, {0.4, 0.55}});
    bool seen = false;
    for (double tol = 0.0; tol <= 1.0; tol += 0.05) {
      const bool p = fit_rate(s, 0.6, tol).pass;
      CHECK((!seen || p));
      seen = seen || p;
    }
    CHECK(seen);
  }
}

TEST_CASE("rate runs validate their input") {
  const auto smooth = builtin_field("sep-trig", {0.5});
  CHECK_THROWS_AS(run_l2_rate(smooth, 1.0, {0.125, 0.0625, 0.03125}), Error);
  const auto rough = builtin_field("checkerboard-smooth", {0.5, 2.0, 20.0});
  try {
    run_l2_rate(rough, 1.0, {0.125, 0.0625, 0.03125, 0.015625});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RoughCoefficientRejected);
  }
  try {
    run_l2_rate(smooth, 0.0, {0.125, 0.0625, 0.03125, 0.015625});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPositiveK);
  }
}

TEST_CASE("constant coefficient rates are degenerate") {
  RateOptions opt;
  opt.T = 0.1;
  opt.cell = {1, 16, 16};
  const auto a = builtin_field("constant", {1.0});
  const auto l2 = run_l2_rate(a, 1.0, {1.0 / 8, 1.0 / 12, 1.0 / 16, 1.0 / 24}, opt);
  CHECK(l2.degenerate);
  CHECK(l2.pass);
  for (const auto& s : l2.samples) CHECK(s.error < 1e-12);
  opt.T = 0.25;
  const auto h1 = run_h1_twoscale_rate(a, 2.0, {1.0 / 16, 1.0 / 20, 1.0 / 24, 1.0 / 32}, opt);
  CHECK(h1.degenerate);
}

TEST_CASE("cylinders") {
  const SpaceTimeMesh mesh(1, 64, 64, 0.5);
  CHECK_NOTHROW(check_cylinder(mesh, {}, 0.5));
  CHECK_THROWS_AS(check_cylinder(mesh, {{0.3, 0.5}, -1.0}, 0.4), Error);
  try {
    check_cylinder(mesh, {{0.5, 0.5}, 0.1}, 0.4);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CylinderOutOfDomain);
  }
  const auto r = lipschitz_radii(ScaleParams(1.0 / 16, 2.0), 0.5, 5);
  CHECK(r.front() == doctest::Approx(0.125));
  CHECK(r.back() == 0.5);
  CHECK(r[2] == doctest::Approx(0.25));
  CHECK_THROWS_AS(lipschitz_radii(ScaleParams(1.0 / 4, 1.0), 0.5, 5), Error);
}

TEST_CASE("lipschitz profile of affine and corrected-affine data") {
  SUBCASE("affine, constant A") {
    const SpaceTimeMesh mesh(1, 64, 64, 0.5);
    FieldOnMesh u(mesh);
    for (int n = 0; n <= mesh.nt; ++n)
      for (int i = 0; i <= mesh.nx; ++i) u.level(n)[i] = 2.0 * mesh.x(i) + 1.0;
    const auto prof = lipschitz_profile(u, nullptr, ScaleParams(1.0 / 16, 2.0), {}, 0.5, 4.0, 6);
    for (double e : prof.energy) CHECK(e == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(prof.flatness < 1e-12);
    CHECK(prof.max_ratio == doctest::Approx(1.0));
    CHECK_THROWS_AS(lipschitz_profile(u, nullptr, ScaleParams(1.0 / 16, 2.0), {}, 0.5, 3.0), Error);
  }
  SUBCASE("x + eps chi, sep-trig") {
    const ScaleParams sc(1.0 / 32, 2.0);
    const auto a = builtin_field("sep-trig", {0.5});
    const auto chi = solve_parabolic_corrector(a, 1.0, CellGrid(1, 64, 64, 1.0));
    const auto mesh = resolved_mesh(1, sc, 0.25);
    CorrectedPolynomialBasis basis(mesh, sc, chi, nullptr, 1);
    FieldOnMesh u(mesh);
    for (int n = 0; n <= mesh.nt; ++n) {
      basis.evaluate(n);
      std::copy(basis.values(0).begin(), basis.values(0).end(), u.level(n).begin());
    }
    const auto prof = lipschitz_profile(u, nullptr, sc, {}, 0.5, 4.0, 6);
    MESSAGE("corrected-affine flatness " << prof.flatness);
    CHECK(prof.flatness <= 0.05);
    // Bounded by 1 + corrector energy.
    for (double r : prof.ratio) CHECK(r <= 1.0 + 1e-12 + chi.energy_bound);
  }
}

TEST_CASE("excess of corrected polynomials") {
  const ScaleParams sc(1.0 / 16, 2.0);
  const auto a = builtin_field("sep-trig", {0.5});
  const CellGrid cell(1, 64, 64, 1.0);
  const auto chi = solve_parabolic_corrector(a, 1.0, cell);
  const auto ahat = effective_lambda(a, 1.0, cell);
  const auto flux = compute_flux(a, 1.0, chi, ahat);
  const auto chi2 = solve_second_correctors(a, 1.0, chi, flux);
  const auto mesh = resolved_mesh(1, sc, 0.25);
  const std::vector<double> radii{0.125, 0.25, 0.5};
  CorrectedPolynomialBasis basis(mesh, sc, chi, &chi2, 2);
  REQUIRE(basis.size() == 2);
  FieldOnMesh p1(mesh), p2(mesh);
  for (int n = 0; n <= mesh.nt; ++n) {
    basis.evaluate(n);
    for (int i = 0; i <= mesh.nx; ++i) {
      p1.level(n)[i] = 0.3 + 1.7 * basis.values(0)[i];
      p2.level(n)[i] = p1.level(n)[i] - 0.8 * basis.values(1)[i] + 2.0 * 0.8 * ahat.matrix(0, 0) * mesh.t(n);
    }
  }
  const auto e1 = excess_profile(p1, chi, nullptr, nullptr, sc, {}, radii, 1);
  for (std::size_t r = 0; r < radii.size(); ++r) {
    CHECK(e1.excess[r] <= 1e-10 * e1.energy[r]);
    CHECK(e1.coefficients[r][0] == doctest::Approx(1.7));
  }
  const auto e2 = excess_profile(p2, chi, &chi2, &ahat.matrix, sc, {}, radii, 2);
  const auto e21 = excess_profile(p2, chi, nullptr, nullptr, sc, {}, radii, 1);
  for (std::size_t r = 0; r < radii.size(); ++r) {
    CHECK(e2.excess[r] <= 1e-10 * e2.energy[r]);
    CHECK(e2.coefficients[r][1] == doctest::Approx(-0.8));
    // e_0 = 2 e_kl ahat_kl.
    CHECK(e2.e0[r] == doctest::Approx(-2.0 * 0.8 * ahat.matrix(0, 0)));
    CHECK(e21.excess[r] > 1e-3);
    CHECK(e21.excess[r] <= e21.energy[r]);
  }
  CHECK_THROWS_AS(excess_profile(p2, chi, nullptr, nullptr, sc, {}, radii, 2), Error);
}
