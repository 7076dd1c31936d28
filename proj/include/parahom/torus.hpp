#pragma once

// Uniform periodic grids on the space-time cell T^d x [0, lambda) and the
// discrete calculus shared by every cell computation.
//
// Storage is time-major: index = n * n_y^d + i1 + n_y * i2.  Axis numbering
// follows the same convention everywhere: axes 0..d-1 are spatial, axis d is
// time.  Two families of difference operators live here:
//
//   discrete_gradient      collocated centered stencil (f(i+1) - f(i-1)) / 2h
//   forward_diff / backward_diff
//                          one-sided differences; backward_diff(forward_diff(f))
//                          is the compact 3-point Laplacian whose Fourier
//                          symbol poisson_spacetime divides by.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace parahom {

struct CellGrid {
  int d = 1;
  int n_y = 64;
  int n_s = 64;
  double lambda = 1.0;

  CellGrid() = default;
  CellGrid(int dim, int ny, int ns, double lam);

  double h() const { return 1.0 / n_y; }
  double tau() const { return lambda / n_s; }
  // Grid spacing along an axis (spatial axes, then time).
  double spacing(int axis) const { return axis < d ? h() : tau(); }
  int extent(int axis) const { return axis < d ? n_y : n_s; }

  std::size_t spatial_size() const { return d == 1 ? std::size_t(n_y) : std::size_t(n_y) * n_y; }
  std::size_t size() const { return spatial_size() * std::size_t(n_s); }

  std::size_t index(int i1, int i2, int n) const {
    return std::size_t(n) * spatial_size() + std::size_t(i1) + std::size_t(n_y) * std::size_t(i2);
  }
  // Multi-index (i1, i2, n) of a flat index; i2 = 0 when d = 1.
  std::array<int, 3> unflatten(std::size_t idx) const;
  // Flat index of the neighbour `offset` steps along `axis` with wraparound.
  std::size_t neighbour(std::size_t idx, int axis, int offset) const;

  double y(int i) const { return i * h(); }
  double s(int n) const { return n * tau(); }

  bool operator==(const CellGrid& o) const {
    return d == o.d && n_y == o.n_y && n_s == o.n_s && lambda == o.lambda;
  }
};

// A sampled scalar (1, lambda)-periodic function.  Vector and matrix valued
// cell quantities are arrays of these.
class CellField {
 public:
  CellField() = default;
  explicit CellField(const CellGrid& grid, double fill = 0.0);
  CellField(const CellGrid& grid, std::vector<double> values);

  const CellGrid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double at(int i1, int i2, int n) const;

  CellField& operator+=(const CellField& o);
  CellField& operator-=(const CellField& o);
  CellField& operator*=(double c);

  // One time slice as a contiguous view.
  std::span<const double> slice(int n) const;
  std::span<double> slice(int n);

 private:
  CellGrid grid_;
  std::vector<double> values_;
};

CellField operator+(CellField a, const CellField& b);
CellField operator-(CellField a, const CellField& b);
CellField operator*(double c, CellField a);

using VectorField = std::vector<CellField>;
using MatrixField = std::vector<std::vector<CellField>>;

// Uniform average over the cell (every weight equal on a periodic grid).
double cell_mean(const CellField& f);
// Root-mean-square over the cell, i.e. the normalized L2(cell) norm.
double cell_rms(const CellField& f);
double max_abs(const CellField& f);
// Spatial average of one time slice.
double slice_mean(const CellField& f, int n);

// Centered differences (f(i+1) - f(i-1)) / (2h) per spatial axis.
VectorField discrete_gradient(const CellField& f);
// Centered difference along any axis (time allowed).
CellField centered_diff(const CellField& f, int axis);
// (f(i+1) - f(i)) / spacing and (f(i) - f(i-1)) / spacing with wraparound.
CellField forward_diff(const CellField& f, int axis);
CellField backward_diff(const CellField& f, int axis);
// Compact space-time Laplacian sum_a backward_diff(forward_diff(f, a), a).
CellField spacetime_laplacian(const CellField& f);

// Multipliers of spacetime_laplacian on the discrete Fourier modes, laid out
// to match the half-complex output of a real-to-complex transform over the
// axes (time, y2, y1).
class SpectralSymbol {
 public:
  explicit SpectralSymbol(const CellGrid& grid);
  const CellGrid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  // Symbol of the mode with integer frequencies (m1, m2, m_s).
  static double mode(const CellGrid& grid, int m1, int m2, int ms);

 private:
  CellGrid grid_;
  std::vector<double> values_;
};

// Solves spacetime_laplacian(f) = g with mean(f) = 0 by Fourier
// diagonalization.  Throws NonZeroMean when |mean(g)| exceeds both
// tol_mean * rms(g) and 1e-14.
CellField poisson_spacetime(const CellField& g, double tol_mean = 1e-10);

}  // namespace parahom
