#ifndef PEAKTRACK_CLUSTERING_HPP
#define PEAKTRACK_CLUSTERING_HPP

#include <vector>

#include <Eigen/Dense>

namespace pt {

// Density-based clustering. Returns one label per point, -1 for noise.
// Deterministic: clusters are grown by expanding neighbors in index order.
std::vector<int> dbscan(const std::vector<Eigen::Vector3d>& points, double eps,
                        int min_pts);

struct MeanShiftMode {
  Eigen::Vector3d mode;
  int member_count;
};

// Flat-kernel mean shift. Each point iterates to the mean of its neighbors
// within `bandwidth` until the shift drops below `tol`; converged positions
// within `merge_radius` of an earlier mode are merged into it.
std::vector<MeanShiftMode> mean_shift(const std::vector<Eigen::Vector3d>& points,
                                      double bandwidth, double tol,
                                      double merge_radius);

// Same, but also reports which mode each point converged to.
std::vector<MeanShiftMode> mean_shift_labeled(const std::vector<Eigen::Vector3d>& points,
                                              double bandwidth, double tol,
                                              double merge_radius,
                                              std::vector<int>& labels);

} // namespace pt

#endif
