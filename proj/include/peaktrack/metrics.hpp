#ifndef PEAKTRACK_METRICS_HPP
#define PEAKTRACK_METRICS_HPP

#include <map>
#include <string>
#include <vector>

#include "peaktrack/geometry.hpp"

namespace pt {

// Overlap between two binary masks: 2|A n B| / (|A| + |B|).
// Both masks empty counts as a perfect match (1.0).
double dice(const BinaryMask& a, const BinaryMask& b);

struct AngularErrorResult {
  double mean_deg;
  std::size_t voxels_compared;
};

// Mean voxel-wise axial angle, degrees, over voxels where both peaks have
// nonzero length: arccos(|<a,b>| / (|a||b|)), range [0, 90].
AngularErrorResult mean_angular_error(const OrientationMap& a, const OrientationMap& b);

// Loss inputs: flat target/prediction arrays of matching shape.
struct LossSample {
  std::vector<double> y;     // targets
  std::vector<double> y_hat; // predictions
};

// Binary cross-entropy, mean over elements. Predictions are clamped to
// [eps, 1-eps], eps = 1e-7.
double bce_loss(const LossSample& s);

// Cosine-similarity loss over 3-vectors (arrays are xyz-interleaved):
// -(1/N) sum |<y_hat_i, y_i>| / (|y_hat_i| |y_i|). Range [-1, 0].
double cosine_loss(const LossSample& s);

struct BundleScore {
  double dice;
  double mean_angular_error_deg; // NaN when no orientation maps were given
  std::size_t voxels_compared;
};

struct EvalReport {
  std::map<std::string, BundleScore> per_bundle;
  double mean_dice;
  double mean_angular_error_deg; // NaN when no bundle had orientations

  std::string to_text() const;
  std::string to_key_value() const;
};

// Per-bundle Dice and angular error plus cross-bundle means. The mask maps
// must share one bundle-name set; the orientation maps must either share
// that same name set or both be empty (mask-only evaluation).
EvalReport evaluate(const std::map<std::string, BinaryMask>& pred_masks,
                    const std::map<std::string, BinaryMask>& ref_masks,
                    const std::map<std::string, OrientationMap>& pred_toms,
                    const std::map<std::string, OrientationMap>& ref_toms);

} // namespace pt

#endif
