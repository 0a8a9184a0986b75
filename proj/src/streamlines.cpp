#include "peaktrack/streamlines.hpp"

#include <algorithm>
#include <cmath>

#include "peaktrack/bspline.hpp"

namespace pt {

double arc_length(const Streamline& s) {
  double len = 0.0;
  for (std::size_t i = 1; i < s.points.size(); ++i)
    len += (s.points[i] - s.points[i - 1]).norm();
  return len;
}

Streamline smooth_bspline(const Streamline& s, double smoothing, double out_spacing) {
  // Exact duplicates would break the chord parameterization.
  std::vector<Vector3> pts;
  pts.reserve(s.points.size());
  for (const auto& p : s.points)
    if (pts.empty() || (p - pts.back()).norm() > 0.0)
      pts.push_back(p);
  if (pts.size() < 4)
    return s;

  const int n = static_cast<int>(pts.size());
  std::vector<double> params(n, 0.0);
  double total = 0.0;
  for (int i = 1; i < n; ++i) {
    total += (pts[i] - pts[i - 1]).norm();
    params[i] = total;
  }
  for (auto& u : params)
    u /= total;

  const BSplineFit fit = fit_bspline(pts, params, smoothing);

  int n_out = static_cast<int>(std::llround(total / out_spacing)) + 1;
  n_out = std::max(n_out, 2);
  Streamline out;
  out.points.reserve(n_out);
  for (int i = 0; i < n_out; ++i) {
    const double u = static_cast<double>(i) / (n_out - 1);
    const Vector3 p = fit.curve.evaluate(u);
    if (!out.points.empty() && (p - out.points.back()).norm() == 0.0)
      continue;
    out.points.push_back(p);
  }
  if (out.points.size() < 2)
    return s;
  return out;
}

BinaryMask voxelize(const Tractogram& t) {
  BinaryMask mask(t.geometry);
  const GridGeometry& geom = t.geometry;
  auto stamp = [&](const Vector3& p_vox) {
    const auto v = geom.nearest_voxel(p_vox);
    if (geom.in_bounds(v[0], v[1], v[2]))
      mask.set(v[0], v[1], v[2]);
  };
  for (const Streamline& s : t.streamlines) {
    if (s.points.empty())
      continue;
    Vector3 prev = geom.world_to_voxel(s.points[0]);
    stamp(prev);
    for (std::size_t i = 1; i < s.points.size(); ++i) {
      const Vector3 cur = geom.world_to_voxel(s.points[i]);
      const double len = (cur - prev).norm();
      const int n_sub = std::max(1, static_cast<int>(std::ceil(len / 0.5)));
      for (int j = 1; j <= n_sub; ++j)
        stamp(prev + (cur - prev) * (static_cast<double>(j) / n_sub));
      prev = cur;
    }
  }
  return mask;
}

} // namespace pt
