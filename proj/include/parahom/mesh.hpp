#pragma once

// Node meshes on Omega_T = (0,1)^d x (0,T) and fields stored on them.

#include <cstddef>
#include <span>
#include <vector>

namespace parahom {

struct SpaceTimeMesh {
  int d = 1;
  int nx = 64;  // cells per spatial axis; nodes x_i = i h, i = 0..nx
  int nt = 64;  // time steps; levels t_n = n tau, n = 0..nt
  double T = 1.0;

  SpaceTimeMesh() = default;
  SpaceTimeMesh(int dim, int nx_, int nt_, double T_);

  double h() const { return 1.0 / nx; }
  double tau() const { return T / nt; }
  double x(int i) const { return i * h(); }
  double t(int n) const { return n * tau(); }
  int nodes_per_axis() const { return nx + 1; }
  std::size_t level_size() const {
    return d == 1 ? std::size_t(nx + 1) : std::size_t(nx + 1) * std::size_t(nx + 1);
  }
  std::size_t node(int i1, int i2) const { return std::size_t(i1) + std::size_t(nx + 1) * std::size_t(i2); }
  bool boundary(int i1, int i2) const {
    return i1 == 0 || i1 == nx || (d == 2 && (i2 == 0 || i2 == nx));
  }
  bool operator==(const SpaceTimeMesh& o) const {
    return d == o.d && nx == o.nx && nt == o.nt && T == o.T;
  }
};

// Node values on a subset of the mesh's time levels: levels
// first, first + stride, ..., up to nt.  The default keeps every level.
class FieldOnMesh {
 public:
  FieldOnMesh() = default;
  explicit FieldOnMesh(const SpaceTimeMesh& mesh, int stride = 1, int first = 0);

  const SpaceTimeMesh& mesh() const { return mesh_; }
  int stride() const { return stride_; }
  int first() const { return first_; }
  int levels() const { return levels_; }
  // Mesh level index of stored level j.
  int level_index(int j) const { return first_ + j * stride_; }
  double time(int j) const { return mesh_.t(level_index(j)); }
  double stored_tau() const { return mesh_.tau() * stride_; }
  // True when mesh level n is one of the stored levels.
  bool stores(int n) const { return n >= first_ && (n - first_) % stride_ == 0 && n <= mesh_.nt; }

  std::span<double> level(int j);
  std::span<const double> level(int j) const;
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool same_layout(const FieldOnMesh& o) const {
    return mesh_ == o.mesh_ && stride_ == o.stride_ && first_ == o.first_;
  }

 private:
  SpaceTimeMesh mesh_;
  int stride_ = 1;
  int first_ = 0;
  int levels_ = 0;
  std::vector<double> values_;
};

}  // namespace parahom
