#ifndef PEAKTRACK_REFERENCE_PREP_HPP
#define PEAKTRACK_REFERENCE_PREP_HPP

#include "peaktrack/clustering.hpp"
#include "peaktrack/streamlines.hpp"

namespace pt {

// Start/end region masks of one tract. Disjoint, both nonempty.
struct EndpointRegions {
  BinaryMask start;
  BinaryMask end;
};

struct ClusterParams {
  double dbscan_eps_mm;        // 0 = derive as 3 * mean voxel spacing
  int dbscan_min_pts = 5;
  int subset_size = 1000;
  double meanshift_bandwidth = 0.3; // on unit vectors
  double meanshift_tol = 1e-4;
  double meanshift_merge_radius = 0.1;

  ClusterParams() : dbscan_eps_mm(0.0) {}

  double effective_eps(const GridGeometry& geom) const {
    return dbscan_eps_mm > 0.0 ? dbscan_eps_mm : 3.0 * geom.spacing().mean();
  }
};

// Split the streamline endpoints into a start and an end region: DBSCAN on a
// uniform endpoint subsample, keep the two largest clusters, extend the
// labels to every endpoint with a nearest-neighbor classifier, voxelize, and
// clean up with binary closing and dilation. The cluster whose centroid is
// lexicographically smaller in (z, y, x) world mm becomes "start".
EndpointRegions extract_endpoint_regions(const Tractogram& t, const ClusterParams& params,
                                         int close_iters = 1, int dilate_iters = 1);

// Per voxel: cluster the unit tangents of all intersecting streamline
// segments (mean shift after antipodal canonicalization) and keep the
// normalized mean of the biggest cluster. Voxels no segment touches stay
// zero.
OrientationMap extract_tom(const Tractogram& t, const ClusterParams& params);

} // namespace pt

#endif
