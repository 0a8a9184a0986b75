#ifndef PEAKTRACK_TRACKING_HPP
#define PEAKTRACK_TRACKING_HPP

#include <cstdint>
#include <optional>

#include "peaktrack/geometry.hpp"
#include "peaktrack/rng.hpp"
#include "peaktrack/streamlines.hpp"

namespace pt {

enum class TrackingMode { probabilistic, deterministic };

struct TrackerConfig {
  double step_size_vox = 0.7;   // step size, voxels
  double gaussian_std = 0.15;   // sampling std on unit-vector components
  double min_length_mm = 50.0;
  int target_count = 2000;
  int max_steps = 1000;         // per direction
  int max_attempt_factor = 100; // attempt budget = factor * target_count
  double peak_eps = 1e-6;       // |interpolated peak| below this terminates
  std::uint64_t master_seed = 0;
  TrackingMode mode = TrackingMode::probabilistic;
};

// Tracking substrate plus constraint masks, all on one grid.
struct TrackingContext {
  OrientationMap tom;
  BinaryMask tract_mask;
  BinaryMask start_mask;
  BinaryMask end_mask;

  TrackingContext(OrientationMap tom_, BinaryMask tract, BinaryMask start,
                  BinaryMask end);
};

// Normalize `peak`, perturb each component with N(0, std^2) noise, and
// renormalize. std = 0 returns the unit peak exactly. Throws on a zero peak.
Vector3 sample_direction(const Vector3& peak, double std, Random& rng);

// Trilinear interpolation over the 8 surrounding voxels, each corner peak
// first flipped to a nonnegative dot product with `prev_dir` (or with the
// nearest voxel's peak when absent). Out-of-bounds corners contribute zero.
// The result may be arbitrarily short; callers test against peak_eps.
Vector3 interpolate_peak(const OrientationMap& tom, const Vector3& pos_vox,
                         const std::optional<Vector3>& prev_dir);

enum class RejectReason {
  too_short,
  endpoint_not_in_regions,
  left_mask_degenerate,
};

struct TrackResult {
  std::optional<Streamline> streamline; // world mm, smoothed
  RejectReason reject = RejectReason::left_mask_degenerate;

  bool accepted() const { return streamline.has_value(); }
};

// Bidirectional propagation from a seed (voxel coordinates): march once
// along the seed voxel's peak and once along its negation, sampling
// (probabilistic) or taking (deterministic) the interpolated direction each
// step. Accepted streamlines satisfy every filter_streamlines condition,
// including after B-spline smoothing.
TrackResult track_streamline(const TrackingContext& ctx, const Vector3& seed_vox,
                             const TrackerConfig& cfg, Random& rng);

struct BundleResult {
  Tractogram tractogram;
  std::uint64_t attempts = 0;
  std::uint64_t accepted = 0;
  bool attempt_budget_exhausted = false;
};

// Seed uniformly over set voxels (uniform within each voxel cube) until
// `target_count` streamlines pass all filters or the attempt budget runs
// out. Attempt i uses an RNG substream derived from (master_seed, i), and
// accepted streamlines keep attempt order, so the output is byte-identical
// for any thread count.
BundleResult track_bundle(const TrackingContext& ctx, const TrackerConfig& cfg,
                          int n_threads = 1);

// Keep exactly the streamlines that (a) never leave the tract mask,
// (b) connect the start and end regions (either orientation), and
// (c) are at least `min_length_mm` long.
Tractogram filter_streamlines(const Tractogram& t, const BinaryMask& tract_mask,
                              const BinaryMask& start_mask, const BinaryMask& end_mask,
                              double min_length_mm);

inline Tractogram filter_streamlines(const Tractogram& t, const TrackingContext& ctx,
                                     double min_length_mm) {
  return filter_streamlines(t, ctx.tract_mask, ctx.start_mask, ctx.end_mask,
                            min_length_mm);
}

// Per voxel with a nonzero TOM peak: the original peak with the smallest
// axial angle to it, sign-flipped to a nonnegative dot product. Voxels with
// a zero TOM peak (or no original peaks) stay zero.
OrientationMap select_best_original_peak(const PeakImage& peaks, const OrientationMap& tom);

// Weighted mean of the unit TOM direction and the unit best-original-peak
// direction (sign-aligned), renormalized. weight = 1 gives pure TOM,
// weight = 0 the pure best original peak.
OrientationMap fuse_prior(const OrientationMap& tom, const PeakImage& peaks,
                          double weight);

} // namespace pt

#endif
