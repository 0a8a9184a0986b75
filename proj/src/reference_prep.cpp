#include "peaktrack/reference_prep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "peaktrack/errors.hpp"

namespace pt {

namespace {

// Uniform-stride subsample, identity when the budget covers everything.
std::vector<std::size_t> subsample_indices(std::size_t n, int subset_size) {
  std::vector<std::size_t> idx;
  if (static_cast<std::size_t>(subset_size) >= n) {
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      idx[i] = i;
    return idx;
  }
  idx.reserve(subset_size);
  for (int i = 0; i < subset_size; ++i)
    idx.push_back(static_cast<std::size_t>(
        static_cast<double>(i) * static_cast<double>(n) / subset_size));
  return idx;
}

BinaryMask voxelize_points(const std::vector<Eigen::Vector3d>& points,
                           const GridGeometry& geom) {
  BinaryMask mask(geom);
  for (const auto& p : points) {
    const auto v = geom.nearest_voxel(geom.world_to_voxel(p));
    if (geom.in_bounds(v[0], v[1], v[2]))
      mask.set(v[0], v[1], v[2]);
  }
  return mask;
}

double nearest_member_distance(const Eigen::Vector3d& p,
                               const std::vector<Eigen::Vector3d>& members) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : members)
    best = std::min(best, (m - p).squaredNorm());
  return best;
}

} // namespace

EndpointRegions extract_endpoint_regions(const Tractogram& t, const ClusterParams& params,
                                         int close_iters, int dilate_iters) {
  if (t.streamlines.empty())
    throw DataError("endings-empty-tractogram", "tractogram has no streamlines");

  std::vector<Eigen::Vector3d> endpoints;
  endpoints.reserve(2 * t.streamlines.size());
  for (const Streamline& s : t.streamlines) {
    endpoints.push_back(s.points.front());
    endpoints.push_back(s.points.back());
  }

  const auto subset_idx = subsample_indices(endpoints.size(), params.subset_size);
  std::vector<Eigen::Vector3d> subset(subset_idx.size());
  for (std::size_t i = 0; i < subset_idx.size(); ++i)
    subset[i] = endpoints[subset_idx[i]];

  const double eps = params.effective_eps(t.geometry);
  const auto labels = dbscan(subset, eps, params.dbscan_min_pts);

  std::map<int, int> cluster_sizes;
  for (int l : labels)
    if (l >= 0)
      cluster_sizes[l] += 1;
  if (cluster_sizes.size() < 2)
    throw DataError("endings-inseparable",
                    "endpoint clustering found fewer than 2 regions");

  // Two largest clusters; ties resolved toward the lower cluster id.
  std::vector<std::pair<int, int>> ranked(cluster_sizes.begin(), cluster_sizes.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const int id_a = ranked[0].first;
  const int id_b = ranked[1].first;

  std::vector<Eigen::Vector3d> train_a, train_b;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (labels[i] == id_a)
      train_a.push_back(subset[i]);
    else if (labels[i] == id_b)
      train_b.push_back(subset[i]);
  }

  // Nearest-neighbor classification of every endpoint; ties go to group A.
  std::vector<Eigen::Vector3d> members_a, members_b;
  for (const auto& p : endpoints) {
    const double da = nearest_member_distance(p, train_a);
    const double db = nearest_member_distance(p, train_b);
    (da <= db ? members_a : members_b).push_back(p);
  }

  Eigen::Vector3d centroid_a = Eigen::Vector3d::Zero();
  for (const auto& p : members_a)
    centroid_a += p;
  centroid_a /= static_cast<double>(members_a.size());
  Eigen::Vector3d centroid_b = Eigen::Vector3d::Zero();
  for (const auto& p : members_b)
    centroid_b += p;
  centroid_b /= static_cast<double>(members_b.size());

  // "start" is the region whose centroid sorts first by (z, y, x).
  const auto zyx_less = [](const Eigen::Vector3d& p, const Eigen::Vector3d& q) {
    if (p[2] != q[2]) return p[2] < q[2];
    if (p[1] != q[1]) return p[1] < q[1];
    return p[0] < q[0];
  };
  const bool a_is_start = zyx_less(centroid_a, centroid_b);
  const auto& start_points = a_is_start ? members_a : members_b;
  const auto& end_points = a_is_start ? members_b : members_a;

  BinaryMask start = voxelize_points(start_points, t.geometry);
  BinaryMask end = voxelize_points(end_points, t.geometry);
  if (close_iters > 0) {
    start = morphology(start, MorphOp::closing, close_iters);
    end = morphology(end, MorphOp::closing, close_iters);
  }
  if (dilate_iters > 0) {
    start = morphology(start, MorphOp::dilation, dilate_iters);
    end = morphology(end, MorphOp::dilation, dilate_iters);
  }

  // Morphology can make the regions touch; contested voxels go to the
  // region with the closer endpoint (ties to start).
  const auto& d = t.geometry.dims();
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (!start.at(i, j, k) || !end.at(i, j, k))
          continue;
        const Eigen::Vector3d w = t.geometry.voxel_to_world(
            Eigen::Vector3d(i, j, k));
        const double ds = nearest_member_distance(w, start_points);
        const double de = nearest_member_distance(w, end_points);
        if (ds <= de)
          end.set(i, j, k, false);
        else
          start.set(i, j, k, false);
      }

  if (start.count_set() == 0 || end.count_set() == 0)
    throw DataError("endings-empty-region", "an endpoint region came out empty");
  return {std::move(start), std::move(end)};
}

OrientationMap extract_tom(const Tractogram& t, const ClusterParams& params) {
  if (t.streamlines.empty())
    throw DataError("tom-empty-tractogram", "tractogram has no streamlines");

  const GridGeometry& geom = t.geometry;
  std::vector<std::vector<Eigen::Vector3d>> tangents(geom.voxel_count());

  // Segment endpoints and tangent signs are canonicalized so the collected
  // direction sets are bitwise identical when every streamline is reversed.
  const auto lex_less = [](const Vector3& a, const Vector3& b) {
    if (a.x() != b.x()) return a.x() < b.x();
    if (a.y() != b.y()) return a.y() < b.y();
    return a.z() < b.z();
  };

  std::vector<std::size_t> touched; // voxels hit by the current segment
  for (const Streamline& s : t.streamlines) {
    for (std::size_t i = 1; i < s.points.size(); ++i) {
      const Vector3& p0 = s.points[i - 1];
      const Vector3& p1 = s.points[i];
      const bool forward = lex_less(p0, p1);
      const Vector3& lo = forward ? p0 : p1;
      const Vector3& hi = forward ? p1 : p0;
      const Vector3 seg_world = hi - lo;
      const double seg_norm = seg_world.norm();
      if (seg_norm == 0.0)
        continue;
      const Vector3 dir = seg_world / seg_norm;

      touched.clear();
      const Vector3 a = geom.world_to_voxel(lo);
      const Vector3 b = geom.world_to_voxel(hi);
      const double len = (b - a).norm();
      const int n_sub = std::max(1, static_cast<int>(std::ceil(len / 0.5)));
      for (int j = 0; j <= n_sub; ++j) {
        const Vector3 pos = a + (b - a) * (static_cast<double>(j) / n_sub);
        const auto v = geom.nearest_voxel(pos);
        if (!geom.in_bounds(v[0], v[1], v[2]))
          continue;
        const std::size_t idx = geom.index(v[0], v[1], v[2]);
        if (std::find(touched.begin(), touched.end(), idx) == touched.end())
          touched.push_back(idx);
      }
      for (std::size_t idx : touched)
        tangents[idx].push_back(dir);
    }
  }

  OrientationMap tom(geom);
  for (std::size_t v = 0; v < tangents.size(); ++v) {
    auto& dirs = tangents[v];
    if (dirs.empty())
      continue;
    // A canonical processing order keeps every downstream step (scatter sum,
    // mean shift, tie-breaking) independent of streamline traversal order.
    std::sort(dirs.begin(), dirs.end(), lex_less);

    // Antipodal canonicalization against the scatter-matrix principal axis.
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (const auto& dvec : dirs)
      scatter += dvec * dvec.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
    const Eigen::Vector3d principal = eig.eigenvectors().col(2);
    for (auto& dvec : dirs)
      if (dvec.dot(principal) < 0.0)
        dvec = -dvec;

    std::vector<int> labels;
    const auto modes = mean_shift_labeled(dirs, params.meanshift_bandwidth,
                                          params.meanshift_tol,
                                          params.meanshift_merge_radius, labels);
    int best_mode = 0;
    for (std::size_t m = 1; m < modes.size(); ++m)
      if (modes[m].member_count > modes[best_mode].member_count)
        best_mode = static_cast<int>(m);

    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < dirs.size(); ++i)
      if (labels[i] == best_mode)
        mean += dirs[i];
    const double norm = mean.norm();
    tom.set_peak(v, norm > 1e-12 ? Eigen::Vector3d(mean / norm) : principal);
  }
  return tom;
}

} // namespace pt
