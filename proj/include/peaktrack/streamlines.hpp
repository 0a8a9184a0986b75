#ifndef PEAKTRACK_STREAMLINES_HPP
#define PEAKTRACK_STREAMLINES_HPP

#include <vector>

#include "peaktrack/geometry.hpp"

namespace pt {

// Polyline in world mm. At least two points, consecutive points distinct.
struct Streamline {
  std::vector<Vector3> points;
};

// Streamlines plus the reference grid for voxel-space operations.
struct Tractogram {
  std::vector<Streamline> streamlines;
  GridGeometry geometry;
};

// Sum of Euclidean segment lengths, mm.
double arc_length(const Streamline& s);

// Least-squares cubic B-spline approximation with total squared-residual
// budget `smoothing` (mm^2), re-evaluated at uniform parameter steps so the
// output spacing is about `out_spacing` mm. Endpoints are preserved.
// Fewer than 4 points: returned unchanged.
Streamline smooth_bspline(const Streamline& s, double smoothing, double out_spacing);

// Mark every voxel at least one streamline runs through. Segments are
// sampled at intervals of at most 0.5 voxel; samples outside the grid are
// ignored.
BinaryMask voxelize(const Tractogram& t);

} // namespace pt

#endif
