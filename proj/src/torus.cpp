#include "parahom/torus.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstdio>
#include <complex>
#include <mutex>
#include <numbers>
#include <string>

#include "parahom/error.hpp"

namespace parahom {

namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(fftw_malloc(n)) {
    if (ptr == nullptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

struct PlanHandle {
  fftw_plan plan = nullptr;
  ~PlanHandle() {
    if (plan != nullptr) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan);
    }
  }
};

std::vector<int> transform_dims(const CellGrid& g) {
  if (g.d == 1) return {g.n_s, g.n_y};
  return {g.n_s, g.n_y, g.n_y};
}

}  // namespace

CellGrid::CellGrid(int dim, int ny, int ns, double lam) : d(dim), n_y(ny), n_s(ns), lambda(lam) {
  if (d != 1 && d != 2) throw Error(ErrorCode::InvalidArgument, "cell grid dimension must be 1 or 2");
  if (n_y < 4 || n_s < 4 || n_y % 2 != 0 || n_s % 2 != 0)
    throw Error(ErrorCode::InvalidArgument,
                "cell grid needs even n_y, n_s >= 4 (got " + std::to_string(n_y) + ", " +
                    std::to_string(n_s) + ")");
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw Error(ErrorCode::NonPositiveLambda, "temporal period must be positive");
}

std::array<int, 3> CellGrid::unflatten(std::size_t idx) const {
  const std::size_t sp = spatial_size();
  const int n = int(idx / sp);
  const std::size_t r = idx % sp;
  return {int(r % std::size_t(n_y)), int(r / std::size_t(n_y)), n};
}

std::size_t CellGrid::neighbour(std::size_t idx, int axis, int offset) const {
  auto [i1, i2, n] = unflatten(idx);
  auto wrap = [](int i, int m) { return ((i % m) + m) % m; };
  if (axis == d) {
    n = wrap(n + offset, n_s);
  } else if (axis == 0) {
    i1 = wrap(i1 + offset, n_y);
  } else {
    i2 = wrap(i2 + offset, n_y);
  }
  return index(i1, i2, n);
}

CellField::CellField(const CellGrid& grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

CellField::CellField(const CellGrid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw Error(ErrorCode::InvalidArgument, "cell field size does not match its grid");
}

double CellField::at(int i1, int i2, int n) const {
  auto wrap = [](int i, int m) { return ((i % m) + m) % m; };
  return values_[grid_.index(wrap(i1, grid_.n_y), grid_.d == 1 ? 0 : wrap(i2, grid_.n_y),
                             wrap(n, grid_.n_s))];
}

CellField& CellField::operator+=(const CellField& o) {
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

CellField& CellField::operator-=(const CellField& o) {
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

CellField& CellField::operator*=(double c) {
  for (double& v : values_) v *= c;
  return *this;
}

std::span<const double> CellField::slice(int n) const {
  const std::size_t sp = grid_.spatial_size();
  return std::span<const double>(values_).subspan(std::size_t(n) * sp, sp);
}

std::span<double> CellField::slice(int n) {
  const std::size_t sp = grid_.spatial_size();
  return std::span<double>(values_).subspan(std::size_t(n) * sp, sp);
}

CellField operator+(CellField a, const CellField& b) { return a += b; }
CellField operator-(CellField a, const CellField& b) { return a -= b; }
CellField operator*(double c, CellField a) { return a *= c; }

double cell_mean(const CellField& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += v;
  return sum / double(f.size());
}

double cell_rms(const CellField& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += v * v;
  return std::sqrt(sum / double(f.size()));
}

double max_abs(const CellField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

double slice_mean(const CellField& f, int n) {
  double sum = 0.0;
  for (double v : f.slice(n)) sum += v;
  return sum / double(f.grid().spatial_size());
}

namespace {

// Generic stencil pass: out[i] = (c_plus * f[i+1] + c_zero * f[i] + c_minus * f[i-1]) / spacing.
CellField stencil(const CellField& f, int axis, double c_minus, double c_zero, double c_plus,
                  double scale) {
  const CellGrid& g = f.grid();
  if (axis < 0 || axis > g.d) throw Error(ErrorCode::InvalidArgument, "axis out of range");
  CellField out(g);
  const double inv = 1.0 / (scale * g.spacing(axis));
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double fp = f[g.neighbour(i, axis, +1)];
    const double fm = f[g.neighbour(i, axis, -1)];
    out[i] = (c_plus * fp + c_zero * f[i] + c_minus * fm) * inv;
  }
  return out;
}

}  // namespace

CellField centered_diff(const CellField& f, int axis) { return stencil(f, axis, -1.0, 0.0, 1.0, 2.0); }
CellField forward_diff(const CellField& f, int axis) { return stencil(f, axis, 0.0, -1.0, 1.0, 1.0); }
CellField backward_diff(const CellField& f, int axis) { return stencil(f, axis, -1.0, 1.0, 0.0, 1.0); }

VectorField discrete_gradient(const CellField& f) {
  VectorField grad;
  for (int a = 0; a < f.grid().d; ++a) grad.push_back(centered_diff(f, a));
  return grad;
}

CellField spacetime_laplacian(const CellField& f) {
  const CellGrid& g = f.grid();
  CellField out(g);
  for (int a = 0; a <= g.d; ++a) {
    const double inv = 1.0 / (g.spacing(a) * g.spacing(a));
    for (std::size_t i = 0; i < f.size(); ++i) {
      out[i] += (f[g.neighbour(i, a, +1)] - 2.0 * f[i] + f[g.neighbour(i, a, -1)]) * inv;
    }
  }
  return out;
}

double SpectralSymbol::mode(const CellGrid& g, int m1, int m2, int ms) {
  auto term = [](int m, int n, double dx) {
    const double sn = std::sin(std::numbers::pi * double(m) / double(n));
    return -4.0 * sn * sn / (dx * dx);
  };
  double v = term(m1, g.n_y, g.h()) + term(ms, g.n_s, g.tau());
  if (g.d == 2) v += term(m2, g.n_y, g.h());
  return v;
}

SpectralSymbol::SpectralSymbol(const CellGrid& grid) : grid_(grid) {
  const int half = grid.n_y / 2 + 1;
  const int n2 = grid.d == 2 ? grid.n_y : 1;
  values_.resize(std::size_t(grid.n_s) * n2 * half);
  std::size_t k = 0;
  for (int ms = 0; ms < grid.n_s; ++ms)
    for (int m2 = 0; m2 < n2; ++m2)
      for (int m1 = 0; m1 < half; ++m1) values_[k++] = mode(grid, m1, m2, ms);
}

CellField poisson_spacetime(const CellField& g_in, double tol_mean) {
  const CellGrid& g = g_in.grid();
  const double rms = cell_rms(g_in);
  if (rms == 0.0) return CellField(g);
  const double mean = cell_mean(g_in);
  // Absolute floor: a right-hand side that is itself round-off of O(1)
  // quantities has a mean of the same size as its rms.
  if (std::abs(mean) > tol_mean * rms && std::abs(mean) > 1e-14)
  {
    char buf[128];
    std::snprintf(buf, sizeof buf, "right-hand side mean %.3g exceeds tolerance relative to rms %.3g", mean, rms);
    throw Error(ErrorCode::NonZeroMean, buf);
  }

  const SpectralSymbol symbol(g);
  const std::size_t n_real = g.size();
  const std::size_t n_cplx = symbol.size();
  FftwBuffer real_buf(sizeof(double) * n_real);
  FftwBuffer cplx_buf(sizeof(fftw_complex) * n_cplx);
  auto* real = static_cast<double*>(real_buf.ptr);
  auto* cplx = static_cast<fftw_complex*>(cplx_buf.ptr);

  const std::vector<int> dims = transform_dims(g);
  PlanHandle fwd, bwd;
  {
    std::lock_guard lock(planner_mutex());
    fwd.plan = fftw_plan_dft_r2c(int(dims.size()), dims.data(), real, cplx, FFTW_ESTIMATE);
    bwd.plan = fftw_plan_dft_c2r(int(dims.size()), dims.data(), cplx, real, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < n_real; ++i) real[i] = g_in[i] - mean;
  fftw_execute(fwd.plan);
  const double norm = 1.0 / double(n_real);
  cplx[0][0] = 0.0;
  cplx[0][1] = 0.0;
  for (std::size_t k = 1; k < n_cplx; ++k) {
    const double sigma = symbol[k];
    if (sigma == 0.0) {
      cplx[k][0] = cplx[k][1] = 0.0;
      continue;
    }
    const double scale = norm / sigma;
    cplx[k][0] *= scale;
    cplx[k][1] *= scale;
  }
  fftw_execute(bwd.plan);
  return CellField(g, std::vector<double>(real, real + n_real));
}

}  // namespace parahom
