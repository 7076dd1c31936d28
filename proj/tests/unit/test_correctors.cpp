#include "doctest.h"

#include <cmath>
#include <numbers>

#include "parahom/correctors.hpp"
#include "parahom/effective.hpp"
#include "parahom/error.hpp"

using namespace parahom;
using std::numbers::pi;

namespace {

CoefficientField inverse_sine() {
  return CoefficientField::scalar(
      1, [](const Point& y, double) { return 1.0 / (1.0 + 0.5 * std::sin(2 * pi * y[0])); }, 0.5,
      Seminorms{0.0, 10.0, 100.0}, "inverse-sine");
}

double max_slice_mean(const CorrectorSet& c) {
  double m = 0.0;
  for (const auto& chi : c.chi)
    for (int n = 0; n < c.grid.n_s; ++n) m = std::max(m, std::abs(slice_mean(chi, n)));
  return m;
}

}  // namespace

TEST_CASE("constant and time-only coefficients give zero correctors") {
  for (int d : {1, 2}) {
    const CellGrid g(d, 16, 16, 1.0);
    for (const char* name : {"constant", "time-only"}) {
      const auto a = builtin_field(name, default_params(name), d);
      const auto c = solve_parabolic_corrector(a, 1.0, g);
      for (const auto& chi : c.chi) CHECK(max_abs(chi) < 1e-12);
      CHECK(c.residual_norm < 1e-12);
      const auto ci = solve_elliptic_corrector_infty(a, g);
      for (const auto& chi : ci.chi) CHECK(max_abs(chi) < 1e-12);
      const auto c0 = solve_elliptic_corrector_zero(a, g);
      for (const auto& chi : c0.chi) CHECK(max_abs(chi) < 1e-12);
    }
  }
}

TEST_CASE("one-dimensional harmonic oracle") {
  const CellGrid g(1, 128, 8, 1.0);
  const auto c = solve_parabolic_corrector(inverse_sine(), 1.0, g);
  double err = 0.0;
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    const double y = g.y(g.unflatten(idx)[0]);
    err = std::max(err, std::abs(c.chi[0][idx] + std::cos(2 * pi * y) / (4 * pi)));
  }
  CHECK(err < 1e-4);
  CHECK(max_slice_mean(c) < 1e-12);
}

TEST_CASE("elliptic slice oracle for sep-trig") {
  const CellGrid g(1, 64, 16, 1.0);
  const auto a = builtin_field("sep-trig", {0.5});
  const auto c = solve_elliptic_corrector_infty(a, g);
  // The face flux a (1 + D+ chi) is constant on slice 0 and equals the
  // harmonic mean of 1 + 0.5 sin(2 pi y).
  for (int i = 0; i < g.n_y; ++i) {
    const double flux = a({g.y(i) + 0.5 * g.h(), 0.0}, 0.0)(0, 0) * (1.0 + c.grad_chi[0][0][g.index(i, 0, 0)]);
    CHECK(flux == doctest::Approx(0.866025403784438646763723).epsilon(1e-10));
  }
  CHECK(max_slice_mean(c) < 1e-12);
  const auto c0 = solve_elliptic_corrector_zero(a, g);
  CHECK(max_abs(c0.chi[0]) < 1e-12);
}

TEST_CASE("elliptic zero corrector for prod-trig") {
  const CellGrid g(1, 64, 16, 1.0);
  const auto c0 = solve_elliptic_corrector_zero(builtin_field("prod-trig", {0.5, 0.25}), g);
  const auto ce = solve_elliptic_corrector_infty(builtin_field("space-only", {0.5}), g);
  CHECK(max_abs(c0.chi[0] - ce.chi[0]) < 1e-9);
}

TEST_CASE("corrector kinds agree for steady coefficients") {
  for (int d : {1, 2}) {
    const CellGrid g(d, 16, 8, 1.0);
    const auto a = builtin_field("space-only", {0.5}, d);
    const auto cp = solve_parabolic_corrector(a, 1.0, g);
    const auto ci = solve_elliptic_corrector_infty(a, g);
    const auto c0 = solve_elliptic_corrector_zero(a, g);
    for (int j = 0; j < d; ++j) {
      CHECK(max_abs(cp.chi[j] - ci.chi[j]) < 1e-8);
      CHECK(max_abs(ci.chi[j] - c0.chi[j]) < 1e-8);
    }
  }
}

TEST_CASE("period map contracts") {
  const CellGrid g(1, 32, 32, 0.25);
  const auto c = solve_parabolic_corrector(builtin_field("sep-trig", {0.5}), 0.25, g);
  const auto& h = c.period_history;
  REQUIRE(h.size() >= 4);
  for (std::size_t i = h.size() - 3; i < h.size(); ++i) CHECK(h[i] <= h[i - 1]);
  CHECK(max_slice_mean(c) < 1e-9);
}

TEST_CASE("off-diagonal coefficients are refused") {
  const CoefficientField a(
      2, [](const Point&, double) { Matrix m(2, 2); m << 1.0, 0.2, 0.2, 1.0; return m; }, 0.5, Seminorms{},
      "full", {}, false);
  try {
    solve_parabolic_corrector(a, 1.0, CellGrid(2, 8, 8, 1.0));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedCoefficient);
  }
}

TEST_CASE("flux and dual correctors") {
  SUBCASE("time-only flux") {
    const CellGrid g(1, 16, 64, 1.0);
    const auto a = builtin_field("time-only", {0.5});
    const auto c = solve_parabolic_corrector(a, 1.0, g);
    const auto t = effective_lambda(a, 1.0, g);
    CHECK(t.matrix(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    const auto flux = compute_flux(a, 1.0, c, t);
    for (std::size_t idx = 0; idx < g.size(); ++idx)
      CHECK(flux.b[0][0][idx] == doctest::Approx(0.5 * std::cos(2 * pi * g.s(g.unflatten(idx)[2]))).epsilon(1e-12));
    const auto dual = solve_dual_correctors(flux, c);
    CHECK(max_abs(dual.phi[0][0][0]) < 1e-12);
    // phi_1(2)1 approximates -(lambda / 4 pi) sin(2 pi s / lambda).
    double err = 0.0;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
      const double s = g.s(g.unflatten(idx)[2]) + 0.5 * g.tau();
      err = std::max(err, std::abs(dual.phi_time[0][0][idx] + std::sin(2 * pi * s) / (4 * pi)));
    }
    CHECK(err < 1e-3);
  }
  SUBCASE("sep-trig identities") {
    for (int d : {1, 2}) {
      const CellGrid g(d, d == 1 ? 64 : 16, d == 1 ? 64 : 16, 1.0);
      const auto a = builtin_field("sep-trig", {0.5}, d);
      const auto c = solve_parabolic_corrector(a, 1.0, g);
      const auto t = effective_lambda(a, 1.0, g);
      const auto flux = compute_flux(a, 1.0, c, t);
      for (const auto& row : flux.b)
        for (const auto& b : row) CHECK(std::abs(cell_mean(b)) < 1e-9);
      const auto dual = solve_dual_correctors(flux, c);
      CHECK(dual.residuals.flux_identity < 1e-8);
      CHECK(dual.residuals.chi_identity < 1e-8);
      CHECK(dual.residuals.antisymmetry == 0.0);
      CHECK(dual.residuals.divergence < 1e-8);
    }
  }
  SUBCASE("zero input") {
    const CellGrid g(1, 16, 16, 1.0);
    const auto a = builtin_field("constant", {1.0});
    const auto c = solve_parabolic_corrector(a, 1.0, g);
    const auto flux = compute_flux(a, 1.0, c, effective_lambda(a, 1.0, g));
    const auto dual = solve_dual_correctors(flux, c);
    for (const auto& pk : dual.phi)
      for (const auto& row : pk)
        for (const auto& f : row) CHECK(max_abs(f) == 0.0);
  }
}

TEST_CASE("second correctors and the quadratic identity") {
  SUBCASE("constant") {
    const CellGrid g(2, 8, 8, 1.0);
    const auto a = builtin_field("constant", {1.5}, 2);
    const auto c = solve_parabolic_corrector(a, 1.0, g);
    const auto t = effective_lambda(a, 1.0, g);
    const auto flux = compute_flux(a, 1.0, c, t);
    const auto c2 = solve_second_correctors(a, 1.0, c, flux);
    for (const auto& row : c2.chi2)
      for (const auto& f : row) CHECK(max_abs(f) < 1e-12);
    const auto r = lemma51_residual(a, 1.0, c, c2, t.matrix);
    CHECK(r.relative < 1e-12);
  }
  SUBCASE("sep-trig") {
    const auto a = builtin_field("sep-trig", {0.5});
    double prev = 0.0;
    for (int n : {32, 64, 128}) {
      const CellGrid g(1, n, n, 1.0);
      const auto c = solve_parabolic_corrector(a, 1.0, g);
      const auto t = effective_lambda(a, 1.0, g);
      const auto flux = compute_flux(a, 1.0, c, t);
      const auto c2 = solve_second_correctors(a, 1.0, c, flux);
      CHECK(std::abs(cell_mean(c2.chi2[0][0])) < 1e-9);
      const auto r = lemma51_residual(a, 1.0, c, c2, t.matrix);
      CHECK(r.consistent < 1e-8);
      MESSAGE("n=" << n << " relative=" << r.relative << " consistent=" << r.consistent);
      if (n == 128) CHECK(r.relative <= 5e-3);
      if (prev > 0.0) CHECK(std::log2(prev / r.relative) >= 1.9);
      prev = r.relative;
      if (n == 64) {
        Matrix off = t.matrix;
        off(0, 0) += 0.1;
        const auto rp = lemma51_residual(a, 1.0, c, c2, off);
        CHECK(rp.mean == doctest::Approx(0.2).epsilon(0.05));
      }
    }
  }
}

TEST_CASE("identities on vanishing fluxes and off-diagonal pairs") {
  SUBCASE("steady 1D flux is solver noise") {
    const CellGrid g(1, 64, 64, 1.0);
    const auto a = builtin_field("space-only", {0.5});
    const auto c = solve_parabolic_corrector(a, 1.0, g);
    const auto t = effective_lambda(a, 1.0, c);
    const auto flux = compute_flux(a, 1.0, c, t);
    const auto dual = solve_dual_correctors(flux, c);
    CHECK(dual.residuals.flux_identity < 1e-8);
    CHECK(dual.residuals.divergence < 1e-8);
  }
  SUBCASE("product coefficient, steady corrector") {
    const CellGrid g(1, 64, 64, 1.0);
    const auto a = builtin_field("prod-trig", {0.5, 0.25});
    const auto c = solve_parabolic_corrector(a, 1.0, g);
    const auto dual = solve_dual_correctors(compute_flux(a, 1.0, c, effective_lambda(a, 1.0, c)), c);
    CHECK(dual.residuals.divergence < 1e-8);
  }
  SUBCASE("2D quadratic identity") {
    const CellGrid g(2, 16, 16, 1.0);
    const auto a = builtin_field("sep-trig", {0.5}, 2);
    const auto c = solve_parabolic_corrector(a, 1.0, g);
    const auto t = effective_lambda(a, 1.0, c);
    CHECK(std::abs(t.matrix(0, 1)) < 1e-15);
    const auto flux = compute_flux(a, 1.0, c, t);
    const auto r = lemma51_residual(a, 1.0, c, solve_second_correctors(a, 1.0, c, flux), t.matrix);
    CHECK(r.consistent < 1e-8);
    CHECK(r.relative < 0.02);
  }
}
