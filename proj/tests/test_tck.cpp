#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include "peaktrack/errors.hpp"
#include "peaktrack/rng.hpp"
#include "peaktrack/tck.hpp"
#include "test_support.hpp"

namespace {

void write_raw(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace

TEST_SUITE("tck") {

TEST_CASE("empty tractogram round-trips and declares count 0") {
  pt_test::TempDir tmp;
  const std::string path = tmp.file("empty.tck");
  pt::Tractogram t;
  pt::write_tck(t, path);

  const std::string bytes = pt_test::read_file_bytes(path);
  CHECK(bytes.find("mrtrix tracks\n") == 0);
  CHECK(bytes.find("count: 0\n") != std::string::npos);
  CHECK(bytes.find("datatype: Float32LE\n") != std::string::npos);

  const auto back = pt::read_tck_streamlines(path);
  CHECK(back.empty());
}

TEST_CASE("single streamline round-trips exactly") {
  pt_test::TempDir tmp;
  const std::string path = tmp.file("one.tck");
  pt::Tractogram t;
  pt::Streamline s;
  s.points = {{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
  t.streamlines.push_back(s);
  pt::write_tck(t, path);

  const auto back = pt::read_tck_streamlines(path);
  REQUIRE(back.size() == 1);
  REQUIRE(back[0].points.size() == 2);
  CHECK(back[0].points[0] == pt::Vector3(0.0, 0.0, 0.0));
  CHECK(back[0].points[1] == pt::Vector3(1.0, 1.0, 1.0));
}

TEST_CASE("write-read-write produces bit-identical files") {
  pt_test::TempDir tmp;
  pt::Random rng(321);
  pt::Tractogram t;
  for (int i = 0; i < 100; ++i) {
    pt::Streamline s;
    const int n = 2 + static_cast<int>(rng.uniform(0, 50));
    pt::Vector3 p(rng.uniform(-80, 80), rng.uniform(-80, 80), rng.uniform(-80, 80));
    s.points.push_back(p);
    for (int j = 1; j < n; ++j) {
      p += pt::Vector3(rng.normal(), rng.normal(), rng.normal());
      s.points.push_back(p);
    }
    t.streamlines.push_back(std::move(s));
  }

  const std::string a = tmp.file("a.tck");
  const std::string b = tmp.file("b.tck");
  pt::write_tck(t, a);
  pt::Tractogram back;
  back.streamlines = pt::read_tck_streamlines(a);
  pt::write_tck(back, b);
  CHECK(pt_test::read_file_bytes(a) == pt_test::read_file_bytes(b));

  // Coordinates survive with float32 precision only, and a second pass
  // through float32 is the identity.
  REQUIRE(back.streamlines.size() == t.streamlines.size());
  for (std::size_t i = 0; i < t.streamlines.size(); ++i) {
    REQUIRE(back.streamlines[i].points.size() == t.streamlines[i].points.size());
    for (std::size_t j = 0; j < t.streamlines[i].points.size(); ++j) {
      const pt::Vector3 orig = t.streamlines[i].points[j];
      const pt::Vector3 got = back.streamlines[i].points[j];
      for (int k = 0; k < 3; ++k)
        CHECK(static_cast<float>(orig[k]) == static_cast<float>(got[k]));
    }
  }
}

TEST_CASE("missing signature raises tck-malformed-header") {
  pt_test::TempDir tmp;
  const std::string path = tmp.file("bad.tck");
  write_raw(path, "not a track file\nEND\n");
  try {
    pt::read_tck_streamlines(path);
    FAIL("expected ParseError");
  } catch (const pt::ParseError& e) {
    CHECK(e.code() == std::string("tck-malformed-header"));
    CHECK(std::string(e.what()).find(path) != std::string::npos);
  }
}

TEST_CASE("wrong datatype raises tck-wrong-datatype") {
  pt_test::TempDir tmp;
  const std::string path = tmp.file("bad.tck");
  write_raw(path, "mrtrix tracks\ndatatype: Float64BE\nfile: . 60\nEND\n");
  try {
    pt::read_tck_streamlines(path);
    FAIL("expected ParseError");
  } catch (const pt::ParseError& e) {
    CHECK(e.code() == std::string("tck-wrong-datatype"));
  }
}

TEST_CASE("binary section without terminator raises tck-truncated") {
  pt_test::TempDir tmp;
  const std::string path = tmp.file("trunc.tck");
  pt::Tractogram t;
  pt::Streamline s;
  s.points = {{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
  t.streamlines.push_back(s);
  pt::write_tck(t, path);
  std::string bytes = pt_test::read_file_bytes(path);
  bytes.resize(bytes.size() - 12); // drop the Inf terminator
  write_raw(path, bytes);
  try {
    pt::read_tck_streamlines(path);
    FAIL("expected ParseError");
  } catch (const pt::ParseError& e) {
    CHECK(e.code() == std::string("tck-truncated"));
  }
}

TEST_CASE("nonexistent file raises tck-open-failed") {
  pt_test::TempDir tmp;
  const std::string path = tmp.file("absent.tck");
  try {
    pt::read_tck_streamlines(path);
    FAIL("expected ParseError");
  } catch (const pt::ParseError& e) {
    CHECK(e.code() == std::string("tck-open-failed"));
    CHECK(e.path() == path);
  }
}

} // TEST_SUITE
