#include "peaktrack/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "peaktrack/errors.hpp"

namespace pt {

GridGeometry::GridGeometry(std::array<int, 3> dims, Vector3 spacing) : dims_(dims) {
  affine_ = Matrix4::Identity();
  for (int c = 0; c < 3; ++c)
    affine_(c, c) = spacing[c];
  spacing_ = spacing;
  validate();
  inverse_ = affine_.inverse();
}

GridGeometry::GridGeometry(std::array<int, 3> dims, const Matrix4& affine)
    : dims_(dims), affine_(affine) {
  for (int c = 0; c < 3; ++c)
    spacing_[c] = affine_.block<3, 1>(0, c).norm();
  validate();
  inverse_ = affine_.inverse();
}

void GridGeometry::validate() const {
  for (int c = 0; c < 3; ++c) {
    if (dims_[c] <= 0)
      throw DataError("geometry-bad-dims", "grid dims must be positive");
    if (!(spacing_[c] > 0.0))
      throw DataError("geometry-bad-spacing", "voxel spacing must be positive");
  }
  const Eigen::Matrix3d rot = affine_.block<3, 3>(0, 0);
  if (std::abs(rot.determinant()) < 1e-12)
    throw DataError("geometry-singular-affine", "affine 3x3 block is not invertible");
  for (int c = 0; c < 3; ++c) {
    if (std::abs(rot.col(c).norm() - spacing_[c]) > 1e-6)
      throw DataError("geometry-affine-spacing-mismatch",
                      "affine column norm disagrees with spacing on axis " +
                          std::to_string(c));
  }
}

Vector3 GridGeometry::voxel_to_world(const Vector3& p_vox) const {
  return affine_.block<3, 3>(0, 0) * p_vox + affine_.block<3, 1>(0, 3);
}

Vector3 GridGeometry::world_to_voxel(const Vector3& p_world) const {
  return inverse_.block<3, 3>(0, 0) * p_world + inverse_.block<3, 1>(0, 3);
}

std::array<int, 3> GridGeometry::nearest_voxel(const Vector3& p_vox) const {
  return {static_cast<int>(std::llround(p_vox[0])),
          static_cast<int>(std::llround(p_vox[1])),
          static_cast<int>(std::llround(p_vox[2]))};
}

bool GridGeometry::compatible(const GridGeometry& other, double tol) const {
  if (dims_ != other.dims_)
    return false;
  return (affine_ - other.affine_).cwiseAbs().maxCoeff() <= tol;
}

std::size_t BinaryMask::count_set() const {
  std::size_t n = 0;
  for (auto v : data)
    n += (v != 0);
  return n;
}

namespace {

BinaryMask dilate_once(const BinaryMask& mask) {
  BinaryMask out(mask.geometry);
  const auto& d = mask.geometry.dims();
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (!mask.at(i, j, k))
          continue;
        out.set(i, j, k);
        if (i > 0) out.set(i - 1, j, k);
        if (i + 1 < d[0]) out.set(i + 1, j, k);
        if (j > 0) out.set(i, j - 1, k);
        if (j + 1 < d[1]) out.set(i, j + 1, k);
        if (k > 0) out.set(i, j, k - 1);
        if (k + 1 < d[2]) out.set(i, j, k + 1);
      }
  return out;
}

BinaryMask erode_once(const BinaryMask& mask) {
  BinaryMask out(mask.geometry);
  const auto& d = mask.geometry.dims();
  // Out-of-grid neighbors count as set, so closing (whose dilation was
  // clipped at the border) stays extensive voxel-wise.
  auto at_or_outside = [&](int i, int j, int k) {
    return !mask.geometry.in_bounds(i, j, k) || mask.at(i, j, k);
  };
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const bool keep = mask.at(i, j, k) && at_or_outside(i - 1, j, k) &&
                          at_or_outside(i + 1, j, k) && at_or_outside(i, j - 1, k) &&
                          at_or_outside(i, j + 1, k) && at_or_outside(i, j, k - 1) &&
                          at_or_outside(i, j, k + 1);
        if (keep)
          out.set(i, j, k);
      }
  return out;
}

} // namespace

BinaryMask morphology(const BinaryMask& mask, MorphOp op, int iterations) {
  if (iterations <= 0)
    throw std::invalid_argument("morphology: iterations must be positive");
  BinaryMask out = mask;
  for (int it = 0; it < iterations; ++it)
    out = dilate_once(out);
  if (op == MorphOp::closing) {
    for (int it = 0; it < iterations; ++it)
      out = erode_once(out);
  }
  return out;
}

OrientationMap prune_peaks(const OrientationMap& tom, double threshold) {
  if (threshold < 0.0)
    throw std::invalid_argument("prune_peaks: threshold must be non-negative");
  OrientationMap out = tom;
  const std::size_t n = tom.geometry.voxel_count();
  for (std::size_t v = 0; v < n; ++v) {
    if (out.peak(v).norm() < threshold)
      out.set_peak(v, Vector3::Zero());
  }
  return out;
}

} // namespace pt
