#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "peaktrack/errors.hpp"
#include "peaktrack/metrics.hpp"
#include "peaktrack/phantom.hpp"
#include "peaktrack/reference_prep.hpp"
#include "peaktrack/rng.hpp"

namespace {

// Polyline through `center` along `dir`, extending `half_len` mm both ways,
// sampled every 0.5 mm.
pt::Streamline line_through(const pt::Vector3& center, const pt::Vector3& dir,
                            double half_len) {
  pt::Streamline s;
  const pt::Vector3 u = dir.normalized();
  for (double t = -half_len; t <= half_len + 1e-9; t += 0.5)
    s.points.push_back(center + t * u);
  return s;
}

pt::GridGeometry unit_grid(int n) {
  return pt::GridGeometry({n, n, n}, pt::Vector3(1.0, 1.0, 1.0));
}

} // namespace

TEST_SUITE("reference_prep") {

TEST_CASE("endpoint regions of a straight tube match the analytic caps") {
  pt::BundleSpec spec;
  spec.kind = pt::BundleKind::straight;
  spec.length_mm = 60.0;
  spec.tube_radius_mm = 5.0;
  spec.n_streamlines = 300;
  spec.jitter_mm = 0.3;
  const pt::GridGeometry geom({44, 24, 24}, pt::Vector3(2.0, 2.0, 2.0));
  pt::Random rng(77);
  const pt::PhantomData ph = pt::generate_phantom(spec, geom, rng);

  const pt::ClusterParams params;
  const pt::EndpointRegions regions = pt::extract_endpoint_regions(ph.tractogram, params);

  // Disjoint and nonempty.
  CHECK(regions.start.count_set() > 0);
  CHECK(regions.end.count_set() > 0);
  for (std::size_t i = 0; i < regions.start.data.size(); ++i)
    CHECK((regions.start.data[i] & regions.end.data[i]) == 0);

  // Match against the analytic caps under the better of the two pairings
  // (the start/end naming convention is arbitrary for a symmetric tube).
  const double ss = pt::dice(regions.start, ph.endpoints_gt.start);
  const double ee = pt::dice(regions.end, ph.endpoints_gt.end);
  const double se = pt::dice(regions.start, ph.endpoints_gt.end);
  const double es = pt::dice(regions.end, ph.endpoints_gt.start);
  const double paired_min = std::max(std::min(ss, ee), std::min(se, es));
  CHECK(paired_min >= 0.6);

  // Every streamline endpoint lands in (or next to) one of the regions.
  pt::BinaryMask either(geom);
  for (std::size_t i = 0; i < either.data.size(); ++i)
    either.data[i] = regions.start.data[i] | regions.end.data[i];
  const pt::BinaryMask grown = pt::morphology(either, pt::MorphOp::dilation, 1);
  for (const pt::Streamline& s : ph.tractogram.streamlines)
    for (const pt::Vector3& p : {s.points.front(), s.points.back()}) {
      const auto v = geom.nearest_voxel(geom.world_to_voxel(p));
      REQUIRE(geom.in_bounds(v[0], v[1], v[2]));
      CHECK(grown.at(v[0], v[1], v[2]));
    }
}

TEST_CASE("endpoints forming one dense ball are inseparable") {
  pt::Random rng(78);
  pt::Tractogram t;
  t.geometry = unit_grid(30);
  // Loop-like bundle: every streamline starts and ends inside one 2 mm ball.
  for (int i = 0; i < 50; ++i) {
    pt::Streamline s;
    const pt::Vector3 a(15.0 + rng.uniform(-1, 1), 15.0 + rng.uniform(-1, 1),
                        15.0 + rng.uniform(-1, 1));
    const pt::Vector3 b(15.0 + rng.uniform(-1, 1), 15.0 + rng.uniform(-1, 1),
                        15.0 + rng.uniform(-1, 1));
    s.points = {a, a + pt::Vector3(5, 5, 0), b + pt::Vector3(5, 5, 0), b};
    t.streamlines.push_back(std::move(s));
  }
  const pt::ClusterParams params;
  try {
    pt::extract_endpoint_regions(t, params);
    FAIL("expected DataError");
  } catch (const pt::DataError& e) {
    CHECK(e.code() == std::string("endings-inseparable"));
  }
}

TEST_CASE("a subset budget covering all endpoints is a no-op") {
  pt::Random rng(79);
  pt::Tractogram t;
  t.geometry = unit_grid(40);
  for (int i = 0; i < 60; ++i) {
    const pt::Vector3 jitter(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    t.streamlines.push_back(
        line_through(pt::Vector3(20, 20, 20) + jitter, {1, 0, 0}, 15.0));
  }
  pt::ClusterParams exact;
  exact.subset_size = static_cast<int>(2 * t.streamlines.size());
  pt::ClusterParams huge;
  huge.subset_size = 1 << 24;
  const pt::EndpointRegions a = pt::extract_endpoint_regions(t, exact);
  const pt::EndpointRegions b = pt::extract_endpoint_regions(t, huge);
  CHECK(a.start.data == b.start.data);
  CHECK(a.end.data == b.end.data);
}

TEST_CASE("a constant +x field maps every covered voxel to (1,0,0)") {
  pt::Random rng(80);
  pt::Tractogram t;
  t.geometry = unit_grid(20);
  for (int i = 0; i < 30; ++i) {
    const pt::Vector3 jitter(0.0, rng.uniform(-3, 3), rng.uniform(-3, 3));
    t.streamlines.push_back(line_through(pt::Vector3(10, 10, 10) + jitter, {1, 0, 0}, 8.0));
  }
  const pt::ClusterParams params;
  const pt::OrientationMap tom = pt::extract_tom(t, params);

  std::size_t covered = 0;
  for (std::size_t v = 0; v < t.geometry.voxel_count(); ++v) {
    const pt::Vector3 p = tom.peak(v);
    if (p.norm() == 0.0)
      continue;
    ++covered;
    CHECK((p - pt::Vector3(1, 0, 0)).norm() < 1e-6);
  }
  CHECK(covered > 0);
}

TEST_CASE("an even mix of v and -v collapses to the axis of v") {
  const pt::Vector3 v = pt::Vector3(1.0, 2.0, 0.5).normalized();
  pt::Tractogram t;
  t.geometry = unit_grid(24);
  for (int i = 0; i < 10; ++i) {
    t.streamlines.push_back(line_through({12, 12, 12}, v, 6.0));
    pt::Streamline rev = line_through({12, 12, 12}, v, 6.0);
    std::reverse(rev.points.begin(), rev.points.end());
    t.streamlines.push_back(std::move(rev));
  }
  const pt::ClusterParams params;
  const pt::OrientationMap tom = pt::extract_tom(t, params);
  std::size_t covered = 0;
  for (std::size_t idx = 0; idx < t.geometry.voxel_count(); ++idx) {
    const pt::Vector3 p = tom.peak(idx);
    if (p.norm() == 0.0)
      continue;
    ++covered;
    CHECK(std::abs(p.dot(v)) >= 1.0 - 1e-6);
  }
  CHECK(covered > 0);
}

TEST_CASE("a 70/30 direction mix lands on the majority axis") {
  const pt::Vector3 major(1.0, 0.0, 0.0);
  const pt::Vector3 minor(std::cos(M_PI / 3.0), std::sin(M_PI / 3.0), 0.0); // 60 deg away
  pt::Tractogram t;
  t.geometry = unit_grid(24);
  for (int i = 0; i < 7; ++i)
    t.streamlines.push_back(line_through({12, 12, 12}, major, 6.0));
  for (int i = 0; i < 3; ++i)
    t.streamlines.push_back(line_through({12, 12, 12}, minor, 6.0));

  pt::ClusterParams params; // bandwidth 0.3 keeps the two groups apart
  const pt::OrientationMap tom = pt::extract_tom(t, params);
  const pt::Vector3 p = tom.peak(t.geometry.index(12, 12, 12));
  REQUIRE(p.norm() > 0.0);
  const double angle_deg = std::acos(std::min(1.0, std::abs(p.dot(major)))) * 180.0 / M_PI;
  CHECK(angle_deg <= 5.0);
}

TEST_CASE("orientation output is invariant under global streamline reversal") {
  pt::BundleSpec spec;
  spec.kind = pt::BundleKind::arc;
  spec.radius_mm = 20.0;
  spec.sweep_deg = 90.0;
  spec.tube_radius_mm = 4.0;
  spec.n_streamlines = 120;
  spec.jitter_mm = 0.2;
  const pt::GridGeometry geom({36, 36, 12}, pt::Vector3(1.5, 1.5, 1.5));
  pt::Random rng(81);
  const pt::PhantomData ph = pt::generate_phantom(spec, geom, rng);

  pt::Tractogram reversed = ph.tractogram;
  for (auto& s : reversed.streamlines)
    std::reverse(s.points.begin(), s.points.end());

  const pt::ClusterParams params;
  const pt::OrientationMap a = pt::extract_tom(ph.tractogram, params);
  const pt::OrientationMap b = pt::extract_tom(reversed, params);
  for (std::size_t v = 0; v < geom.voxel_count(); ++v) {
    const pt::Vector3 pa = a.peak(v);
    const pt::Vector3 pb = b.peak(v);
    REQUIRE((pa.norm() == 0.0) == (pb.norm() == 0.0));
    if (pa.norm() > 0.0)
      CHECK(std::abs(pa.dot(pb)) >= 1.0 - 1e-6);
  }
}

TEST_CASE("nonzero orientation voxels are a subset of the voxelized tract") {
  pt::Random rng(82);
  pt::Tractogram t;
  t.geometry = unit_grid(24);
  for (int i = 0; i < 25; ++i) {
    const pt::Vector3 c(12.0 + rng.uniform(-4, 4), 12.0 + rng.uniform(-4, 4),
                        12.0 + rng.uniform(-4, 4));
    const pt::Vector3 d(rng.normal(), rng.normal(), rng.normal());
    t.streamlines.push_back(line_through(c, d.normalized(), 5.0));
  }
  const pt::ClusterParams params;
  const pt::OrientationMap tom = pt::extract_tom(t, params);
  const pt::BinaryMask cover = pt::voxelize(t);
  for (std::size_t v = 0; v < t.geometry.voxel_count(); ++v)
    if (tom.peak(v).norm() > 0.0)
      CHECK(cover.data[v] == 1);
}

} // TEST_SUITE
