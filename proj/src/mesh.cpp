#include "parahom/mesh.hpp"

#include <cmath>
#include <string>

#include "parahom/error.hpp"

namespace parahom {

SpaceTimeMesh::SpaceTimeMesh(int dim, int nx_, int nt_, double T_) : d(dim), nx(nx_), nt(nt_), T(T_) {
  if (d != 1 && d != 2) throw Error(ErrorCode::InvalidArgument, "mesh dimension must be 1 or 2");
  if (nx < 4 || nt < 4)
    throw Error(ErrorCode::InvalidArgument,
                "mesh needs nx, nt >= 4 (got " + std::to_string(nx) + ", " + std::to_string(nt) + ")");
  if (!(T > 0.0) || !std::isfinite(T)) throw Error(ErrorCode::InvalidArgument, "final time must be positive");
}

FieldOnMesh::FieldOnMesh(const SpaceTimeMesh& mesh, int stride, int first)
    : mesh_(mesh), stride_(stride), first_(first) {
  if (stride < 1 || first < 0 || first > mesh.nt)
    throw Error(ErrorCode::InvalidArgument, "invalid storage stride or first level");
  levels_ = (mesh.nt - first) / stride + 1;
  values_.assign(std::size_t(levels_) * mesh.level_size(), 0.0);
}

std::span<double> FieldOnMesh::level(int j) {
  const std::size_t n = mesh_.level_size();
  return {values_.data() + std::size_t(j) * n, n};
}

std::span<const double> FieldOnMesh::level(int j) const {
  const std::size_t n = mesh_.level_size();
  return {values_.data() + std::size_t(j) * n, n};
}

}  // namespace parahom
