#ifndef PEAKTRACK_PHANTOM_HPP
#define PEAKTRACK_PHANTOM_HPP

#include "peaktrack/geometry.hpp"
#include "peaktrack/reference_prep.hpp"
#include "peaktrack/rng.hpp"
#include "peaktrack/streamlines.hpp"

namespace pt {

enum class BundleKind { straight, arc, u_shape };

// Analytic tube bundle: a parametric centerline (line segment or circular
// arc in the xy-plane) thickened to a tube of parallel-offset streamlines.
struct BundleSpec {
  BundleKind kind = BundleKind::straight;
  double length_mm = 100.0;  // straight only
  double radius_mm = 40.0;   // arc / u_shape centerline radius
  double sweep_deg = 90.0;   // arc / u_shape angular extent
  double tube_radius_mm = 5.0;
  int n_streamlines = 300;
  double jitter_mm = 0.3;         // Gaussian jitter of the radial offset
  double noise_angle_deg = 0.0;   // forwarded to perturb_peaks by callers
  double dropout = 0.0;           // forwarded to perturb_peaks by callers
};

struct PhantomData {
  Tractogram tractogram;    // world mm
  OrientationMap tom_gt;    // analytic unit tangents on covered voxels
  BinaryMask tract_mask_gt; // voxelize(tractogram)
  EndpointRegions endpoints_gt; // analytic end-cap disks, closed + dilated once
};

// Build the bundle centered in `geom`. Streamlines are parallel offsets of
// the centerline, offset uniformly over the tube cross-section disk with a
// Gaussian jitter added to the offset. Throws when the tube (plus a 2-voxel
// margin) does not fit inside the grid.
PhantomData generate_phantom(const BundleSpec& spec, const GridGeometry& geom,
                             Random& rng);

// Rotate each nonzero peak about a random axis perpendicular to it by an
// angle drawn as |N(0, noise_angle_deg^2)|, then zero a `dropout` fraction
// of nonzero voxels. Norm-preserving on surviving peaks.
OrientationMap perturb_peaks(const OrientationMap& tom, double noise_angle_deg,
                             double dropout, Random& rng);

} // namespace pt

#endif
