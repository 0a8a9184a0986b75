#include <doctest.h>

#include <cmath>

#include "peaktrack/errors.hpp"
#include "peaktrack/geometry.hpp"
#include "peaktrack/rng.hpp"

using pt::BinaryMask;
using pt::GridGeometry;
using pt::Matrix4;
using pt::MorphOp;
using pt::OrientationMap;
using pt::Vector3;

TEST_SUITE("geometry") {

TEST_CASE("voxel_to_world with an identity affine is the identity") {
  const GridGeometry g({10, 10, 10}, Vector3(1.0, 1.0, 1.0));
  const Vector3 w = g.voxel_to_world(Vector3(1.0, 2.0, 3.0));
  CHECK(w.isApprox(Vector3(1.0, 2.0, 3.0), 1e-12));
}

TEST_CASE("voxel_to_world scales by the spacing") {
  const GridGeometry g({10, 10, 10}, Vector3(2.5, 2.5, 2.5));
  const Vector3 w = g.voxel_to_world(Vector3(2.0, 0.0, 0.0));
  CHECK(w.isApprox(Vector3(5.0, 0.0, 0.0), 1e-12));
}

TEST_CASE("world/voxel round-trip under random rigid-plus-scale affines") {
  pt::Random rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector3 axis =
        Vector3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Eigen::Matrix3d rot =
        Eigen::AngleAxisd(rng.uniform(0.0, 3.0), axis).toRotationMatrix();
    const Eigen::Matrix3d scale =
        Vector3(rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0))
            .asDiagonal();
    Matrix4 affine = Matrix4::Identity();
    affine.block<3, 3>(0, 0) = rot * scale;
    affine.block<3, 1>(0, 3) =
        Vector3(rng.uniform(-80.0, 80.0), rng.uniform(-80.0, 80.0),
                rng.uniform(-80.0, 80.0));
    const GridGeometry g({16, 16, 16}, affine);

    for (int i = 0; i < 5; ++i) {
      const Vector3 p(rng.uniform(0.0, 15.0), rng.uniform(0.0, 15.0),
                      rng.uniform(0.0, 15.0));
      const Vector3 back = g.world_to_voxel(g.voxel_to_world(p));
      CHECK((back - p).norm() < 1e-9);
    }
  }
}

TEST_CASE("nearest_voxel rounds half away from zero") {
  const GridGeometry g({10, 10, 10}, Vector3(1.0, 1.0, 1.0));
  const auto v = g.nearest_voxel(Vector3(0.5, 1.49, 2.51));
  CHECK(v[0] == 1);
  CHECK(v[1] == 1);
  CHECK(v[2] == 3);
}

TEST_CASE("constructor rejects degenerate grids") {
  CHECK_THROWS_WITH_AS(GridGeometry({0, 5, 5}, Vector3(1.0, 1.0, 1.0)),
                       "grid dims must be positive", pt::DataError);

  Matrix4 zero_column = Matrix4::Identity();
  zero_column(0, 0) = 0.0;
  try {
    GridGeometry({5, 5, 5}, zero_column);
    FAIL("expected a DataError");
  } catch (const pt::DataError& e) {
    CHECK(e.code() == "geometry-bad-spacing");
  }

  // Unit-norm columns but rank 2: the singularity check has to catch it.
  Matrix4 singular = Matrix4::Identity();
  singular.block<3, 1>(0, 1) = Vector3(1.0, 0.0, 0.0);
  try {
    GridGeometry({5, 5, 5}, singular);
    FAIL("expected a DataError");
  } catch (const pt::DataError& e) {
    CHECK(e.code() == "geometry-singular-affine");
  }
}

TEST_CASE("compatible distinguishes dims and affines") {
  const GridGeometry a({5, 5, 5}, Vector3(1.0, 1.0, 1.0));
  const GridGeometry b({5, 5, 5}, Vector3(1.0, 1.0, 1.0));
  const GridGeometry c({6, 5, 5}, Vector3(1.0, 1.0, 1.0));
  const GridGeometry d({5, 5, 5}, Vector3(2.0, 1.0, 1.0));
  CHECK(a.compatible(b));
  CHECK_FALSE(a.compatible(c));
  CHECK_FALSE(a.compatible(d));
}

TEST_CASE("single-voxel dilation sets the center and its six faces") {
  BinaryMask m(GridGeometry({7, 7, 7}, Vector3(1.0, 1.0, 1.0)));
  m.set(3, 3, 3);
  const BinaryMask out = pt::morphology(m, MorphOp::dilation, 1);
  CHECK(out.count_set() == 7);
  CHECK(out.at(3, 3, 3));
  CHECK(out.at(2, 3, 3));
  CHECK(out.at(4, 3, 3));
  CHECK(out.at(3, 2, 3));
  CHECK(out.at(3, 4, 3));
  CHECK(out.at(3, 3, 2));
  CHECK(out.at(3, 3, 4));
}

TEST_CASE("closing leaves a solid cube unchanged") {
  BinaryMask m(GridGeometry({9, 9, 9}, Vector3(1.0, 1.0, 1.0)));
  for (int k = 2; k < 7; ++k)
    for (int j = 2; j < 7; ++j)
      for (int i = 2; i < 7; ++i) m.set(i, j, k);
  const BinaryMask out = pt::morphology(m, MorphOp::closing, 1);
  CHECK(out.data == m.data);
}

TEST_CASE("closing fills a one-voxel hole") {
  BinaryMask m(GridGeometry({7, 7, 7}, Vector3(1.0, 1.0, 1.0)));
  for (int k = 2; k < 5; ++k)
    for (int j = 2; j < 5; ++j)
      for (int i = 2; i < 5; ++i) m.set(i, j, k);
  m.set(3, 3, 3, false);
  const BinaryMask out = pt::morphology(m, MorphOp::closing, 1);
  CHECK(out.at(3, 3, 3));
  for (int k = 2; k < 5; ++k)
    for (int j = 2; j < 5; ++j)
      for (int i = 2; i < 5; ++i) CHECK(out.at(i, j, k));
}

TEST_CASE("dilation and closing are extensive on random masks") {
  pt::Random rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    BinaryMask m(GridGeometry({8, 8, 8}, Vector3(1.0, 1.0, 1.0)));
    for (std::size_t v = 0; v < m.data.size(); ++v)
      m.data[v] = rng.uniform() < 0.2 ? 1 : 0;
    const BinaryMask dil = pt::morphology(m, MorphOp::dilation, 1);
    const BinaryMask clo = pt::morphology(m, MorphOp::closing, 1);
    for (std::size_t v = 0; v < m.data.size(); ++v) {
      if (m.data[v]) {
        CHECK(dil.data[v]);
        CHECK(clo.data[v]);
      }
    }
    CHECK(dil.count_set() >= m.count_set());
  }
}

TEST_CASE("prune_peaks zeroes short peaks and keeps the boundary") {
  OrientationMap tom(GridGeometry({3, 1, 1}, Vector3(1.0, 1.0, 1.0)));
  tom.set_peak(0, Vector3(0.2, 0.0, 0.0));
  tom.set_peak(1, Vector3(0.3, 0.0, 0.0));
  tom.set_peak(2, Vector3(0.0, 0.9, 0.0));

  const OrientationMap out = pt::prune_peaks(tom, 0.3);
  CHECK(out.peak(0).norm() == 0.0);
  CHECK(out.peak(1) == tom.peak(1));
  CHECK(out.peak(2) == tom.peak(2));
}

TEST_CASE("prune_peaks with threshold zero is the identity") {
  pt::Random rng(3);
  OrientationMap tom(GridGeometry({4, 4, 4}, Vector3(1.0, 1.0, 1.0)));
  for (std::size_t v = 0; v < tom.geometry.voxel_count(); ++v)
    tom.set_peak(v, Vector3(rng.normal(), rng.normal(), rng.normal()) * 0.2);
  const OrientationMap out = pt::prune_peaks(tom, 0.0);
  CHECK(out.data == tom.data);
}

TEST_CASE("prune_peaks is idempotent") {
  pt::Random rng(4);
  OrientationMap tom(GridGeometry({4, 4, 4}, Vector3(1.0, 1.0, 1.0)));
  for (std::size_t v = 0; v < tom.geometry.voxel_count(); ++v)
    tom.set_peak(v, Vector3(rng.normal(), rng.normal(), rng.normal()) * 0.3);
  const OrientationMap once = pt::prune_peaks(tom, 0.3);
  const OrientationMap twice = pt::prune_peaks(once, 0.3);
  CHECK(once.data == twice.data);
}

} // TEST_SUITE
