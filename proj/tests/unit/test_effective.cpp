#include "doctest.h"

#include <cmath>
#include <numbers>

#include "parahom/effective.hpp"
#include "parahom/error.hpp"

using namespace parahom;
using std::numbers::pi;

TEST_CASE("constant tensors") {
  for (int d : {1, 2}) {
    const auto a = builtin_field("constant", {2.0}, d);
    const CellGrid g(d, 8, 8, 1.0);
    for (const auto& t : {effective_lambda(a, 1.0, g), effective_infinity(a, g), effective_zero(a, g)}) {
      CHECK((t.matrix - Matrix::Identity(d, d) * 2.0).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(t.mu_cert == doctest::Approx(2.0));
    }
  }
}

TEST_CASE("time-only tensor is the time average") {
  const auto a = builtin_field("time-only", {0.5});
  CHECK(effective_lambda(a, 1.0, CellGrid(1, 8, 32, 1.0)).matrix(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sep-trig limit tensors") {
  const auto a = builtin_field("sep-trig", {0.5});
  const CellGrid g(1, 64, 64, 1.0);
  const auto inf = effective_infinity(a, g);
  CHECK(inf.matrix(0, 0) == doctest::Approx(0.93421545766769411614).epsilon(1e-10));
  const auto zero = effective_zero(a, g);
  CHECK(zero.matrix(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  const auto lam = effective_lambda(a, 1.0, CellGrid(1, 128, 128, 1.0));
  CHECK(lam.matrix(0, 0) > 0.934);
  CHECK(lam.matrix(0, 0) < 1.0);
  CHECK(lam.mu_cert >= a.mu() - 1e-6);
}

TEST_CASE("steady and prod-trig oracles") {
  const CellGrid g(1, 64, 8, 1.0);
  const auto so = builtin_field("space-only", {0.5});
  CHECK(effective_infinity(so, g).matrix(0, 0) == doctest::Approx(0.866025403784438646763723).epsilon(1e-10));
  const auto pt = builtin_field("prod-trig", {0.5, 0.25});
  CHECK(effective_zero(pt, CellGrid(1, 64, 16, 1.0)).matrix(0, 0) ==
        doctest::Approx(0.866025403784438646763723).epsilon(1e-10));
}

TEST_CASE("grid refinement stability") {
  const auto a = builtin_field("sep-trig", {0.5});
  const double coarse = effective_lambda(a, 1.0, CellGrid(1, 64, 64, 1.0)).matrix(0, 0);
  const double fine = effective_lambda(a, 1.0, CellGrid(1, 128, 128, 1.0)).matrix(0, 0);
  CHECK(std::abs(coarse - fine) <= 1e-3);
}

TEST_CASE("ellipticity certificate") {
  Matrix m(2, 2);
  m << 2.0, 0.0, 0.0, 0.5;
  CHECK(ellipticity_certificate(m) == doctest::Approx(0.5));
  CHECK(ellipticity_certificate(m, 7) == doctest::Approx(0.5));
  Matrix one(1, 1);
  one << 0.8;
  CHECK(ellipticity_certificate(one) == 0.8);
}

TEST_CASE("lambda sweep") {
  SUBCASE("constant is degenerate") {
    GridPolicy p{1, 8, 8};
    const auto rep = sweep_lambda(builtin_field("constant", {1.0}), {0.125, 0.25, 4.0, 8.0}, p);
    CHECK(rep.degenerate);
    CHECK(std::isnan(rep.slope_high));
  }
  SUBCASE("rough coefficients are refused") {
    try {
      sweep_lambda(builtin_field("checkerboard-smooth", {0.5, 2.0, 20.0}), {4.0}, GridPolicy{});
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RoughCoefficientRejected);
    }
  }
  SUBCASE("sep-trig ladders") {
    GridPolicy p{1, 64, 64};
    const auto rep = sweep_lambda(builtin_field("sep-trig", {0.5}), {1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8, 0.25, 4.0, 8.0, 16.0, 32.0, 64.0}, p, {}, 2);
    CHECK(rep.slope_high <= -0.8);
    CHECK(rep.slope_low >= 0.8);
    CHECK(rep.slope_corrector_high <= -0.8);
    CHECK(rep.slope_corrector_low >= 0.8);
    for (std::size_t i = 1; i < rep.lambdas.size(); ++i) CHECK(rep.lambdas[i] > rep.lambdas[i - 1]);
    MESSAGE("slopes " << rep.slope_high << " " << rep.slope_low << " " << rep.slope_corrector_high << " "
                      << rep.slope_corrector_low);
  }
}

TEST_CASE("digest is stable") {
  CHECK(fnv1a("") == 14695981039346656037ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
}
