#include "peaktrack/clustering.hpp"

#include <queue>
#include <stdexcept>

namespace pt {

namespace {
constexpr int kUnclassified = -2;
constexpr int kNoise = -1;

std::vector<int> neighbors_of(const std::vector<Eigen::Vector3d>& points,
                              std::size_t idx, double eps_sq) {
  std::vector<int> out;
  for (std::size_t j = 0; j < points.size(); ++j)
    if ((points[j] - points[idx]).squaredNorm() <= eps_sq)
      out.push_back(static_cast<int>(j));
  return out;
}
} // namespace

std::vector<int> dbscan(const std::vector<Eigen::Vector3d>& points, double eps,
                        int min_pts) {
  if (!(eps > 0.0))
    throw std::invalid_argument("dbscan: eps must be positive");
  if (min_pts < 1)
    throw std::invalid_argument("dbscan: min_pts must be at least 1");

  const double eps_sq = eps * eps;
  std::vector<int> labels(points.size(), kUnclassified);
  int next_cluster = 0;

  for (std::size_t i = 0; i < points.size(); ++i) {
    if (labels[i] != kUnclassified)
      continue;
    const auto seeds = neighbors_of(points, i, eps_sq);
    if (static_cast<int>(seeds.size()) < min_pts) {
      labels[i] = kNoise;
      continue;
    }
    const int cluster = next_cluster++;
    labels[i] = cluster;
    std::queue<int> frontier;
    for (int s : seeds)
      if (labels[s] == kUnclassified || labels[s] == kNoise) {
        if (labels[s] == kUnclassified)
          frontier.push(s);
        labels[s] = cluster;
      }
    while (!frontier.empty()) {
      const int p = frontier.front();
      frontier.pop();
      const auto nb = neighbors_of(points, static_cast<std::size_t>(p), eps_sq);
      if (static_cast<int>(nb.size()) < min_pts)
        continue; // border point, not expanded
      for (int q : nb) {
        if (labels[q] == kUnclassified) {
          labels[q] = cluster;
          frontier.push(q);
        } else if (labels[q] == kNoise) {
          labels[q] = cluster;
        }
      }
    }
  }
  for (auto& l : labels)
    if (l == kUnclassified)
      l = kNoise;
  return labels;
}

std::vector<MeanShiftMode> mean_shift_labeled(const std::vector<Eigen::Vector3d>& points,
                                              double bandwidth, double tol,
                                              double merge_radius,
                                              std::vector<int>& labels) {
  if (!(bandwidth > 0.0))
    throw std::invalid_argument("mean_shift: bandwidth must be positive");

  constexpr int kMaxIters = 500;
  const double bw_sq = bandwidth * bandwidth;

  std::vector<MeanShiftMode> modes;
  labels.assign(points.size(), -1);

  for (std::size_t i = 0; i < points.size(); ++i) {
    Eigen::Vector3d x = points[i];
    for (int it = 0; it < kMaxIters; ++it) {
      Eigen::Vector3d sum = Eigen::Vector3d::Zero();
      int n = 0;
      for (const auto& p : points) {
        if ((p - x).squaredNorm() <= bw_sq) {
          sum += p;
          ++n;
        }
      }
      if (n == 0)
        break; // the window moved off the data, keep the last position
      const Eigen::Vector3d next = sum / n;
      const double shift = (next - x).norm();
      x = next;
      if (shift < tol)
        break;
    }
    int assigned = -1;
    for (std::size_t m = 0; m < modes.size(); ++m) {
      if ((modes[m].mode - x).norm() <= merge_radius) {
        assigned = static_cast<int>(m);
        break;
      }
    }
    if (assigned < 0) {
      modes.push_back({x, 1});
      assigned = static_cast<int>(modes.size()) - 1;
    } else {
      modes[assigned].member_count += 1;
    }
    labels[i] = assigned;
  }
  return modes;
}

std::vector<MeanShiftMode> mean_shift(const std::vector<Eigen::Vector3d>& points,
                                      double bandwidth, double tol,
                                      double merge_radius) {
  std::vector<int> labels;
  return mean_shift_labeled(points, bandwidth, tol, merge_radius, labels);
}

} // namespace pt
