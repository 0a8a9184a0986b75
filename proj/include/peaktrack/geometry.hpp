#ifndef PEAKTRACK_GEOMETRY_HPP
#define PEAKTRACK_GEOMETRY_HPP

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace pt {

using Vector3 = Eigen::Vector3d;
using Matrix4 = Eigen::Matrix4d;

// Voxel grid with a RAS world-mm affine. Voxel centers sit at integer
// coordinates; the affine maps homogeneous voxel coordinates to world mm.
// Immutable after construction.
class GridGeometry {
public:
  // Placeholder 1x1x1 unit grid, for members assigned after construction.
  GridGeometry() : GridGeometry({1, 1, 1}, Vector3(1.0, 1.0, 1.0)) {}

  // Axis-aligned grid: affine = diag(spacing), zero translation.
  GridGeometry(std::array<int, 3> dims, Vector3 spacing);

  // General grid. Spacing is derived from the affine's column norms.
  GridGeometry(std::array<int, 3> dims, const Matrix4& affine);

  const std::array<int, 3>& dims() const { return dims_; }
  const Vector3& spacing() const { return spacing_; }
  const Matrix4& affine() const { return affine_; }

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  }

  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && i < dims_[0] && j >= 0 && j < dims_[1] && k >= 0 && k < dims_[2];
  }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * k);
  }

  Vector3 voxel_to_world(const Vector3& p_vox) const;
  Vector3 world_to_voxel(const Vector3& p_world) const;

  // Nearest voxel of a voxel-space position (round half away from zero).
  std::array<int, 3> nearest_voxel(const Vector3& p_vox) const;

  // Same grid: equal dims and affines within `tol` per entry.
  bool compatible(const GridGeometry& other, double tol = 1e-6) const;

private:
  void validate() const;

  std::array<int, 3> dims_;
  Vector3 spacing_;
  Matrix4 affine_;
  Matrix4 inverse_;
};

// Binary volume: tract mask or endpoint-region mask.
struct BinaryMask {
  GridGeometry geometry;
  std::vector<std::uint8_t> data; // one byte per voxel, {0,1}

  explicit BinaryMask(GridGeometry geom)
      : geometry(std::move(geom)), data(geometry.voxel_count(), 0) {}

  bool at(int i, int j, int k) const { return data[geometry.index(i, j, k)] != 0; }
  void set(int i, int j, int k, bool v = true) {
    data[geometry.index(i, j, k)] = v ? 1 : 0;
  }

  std::size_t count_set() const;
};

// Up to three FOD peaks per voxel, peak-major layout
// (p1x,p1y,p1z,p2x,...). Absent peaks are exactly zero. Peaks are axial:
// v and -v denote the same orientation.
struct PeakImage {
  GridGeometry geometry;
  std::vector<float> data; // 9 floats per voxel

  explicit PeakImage(GridGeometry geom)
      : geometry(std::move(geom)), data(geometry.voxel_count() * 9, 0.0f) {}

  Vector3 peak(std::size_t voxel, int which) const {
    const float* p = &data[voxel * 9 + static_cast<std::size_t>(which) * 3];
    return {p[0], p[1], p[2]};
  }
  void set_peak(std::size_t voxel, int which, const Vector3& v) {
    float* p = &data[voxel * 9 + static_cast<std::size_t>(which) * 3];
    p[0] = static_cast<float>(v[0]);
    p[1] = static_cast<float>(v[1]);
    p[2] = static_cast<float>(v[2]);
  }
};

// One tract-specific peak per voxel: the tracking substrate. A zero vector
// means "no tract here".
struct OrientationMap {
  GridGeometry geometry;
  std::vector<float> data; // 3 floats per voxel

  explicit OrientationMap(GridGeometry geom)
      : geometry(std::move(geom)), data(geometry.voxel_count() * 3, 0.0f) {}

  Vector3 peak(std::size_t voxel) const {
    const float* p = &data[voxel * 3];
    return {p[0], p[1], p[2]};
  }
  void set_peak(std::size_t voxel, const Vector3& v) {
    float* p = &data[voxel * 3];
    p[0] = static_cast<float>(v[0]);
    p[1] = static_cast<float>(v[1]);
    p[2] = static_cast<float>(v[2]);
  }
};

enum class MorphOp { closing, dilation };

// Binary morphology with a 6-connected (face-adjacent) structuring element,
// repeated `iterations` times. Voxels outside the grid count as unset.
BinaryMask morphology(const BinaryMask& mask, MorphOp op, int iterations);

// Zero every peak with Euclidean norm strictly below `threshold`.
OrientationMap prune_peaks(const OrientationMap& tom, double threshold = 0.3);

} // namespace pt

#endif
