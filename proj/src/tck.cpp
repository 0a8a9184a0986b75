#include "peaktrack/tck.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "peaktrack/errors.hpp"

namespace pt {

namespace {

struct TckHeader {
  std::string datatype;
  std::size_t offset = 0;
  bool have_offset = false;
};

TckHeader parse_header(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line))
    throw ParseError("tck-malformed-header", path, "empty file");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  if (line != "mrtrix tracks")
    throw ParseError("tck-malformed-header", path, "missing 'mrtrix tracks' signature");

  TckHeader hdr;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line == "END")
      return hdr;
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw ParseError("tck-malformed-header", path, "header line without ':'");
    std::string key = line.substr(0, colon);
    std::string value = line.substr(colon + 1);
    const auto first = value.find_first_not_of(" \t");
    value = first == std::string::npos ? "" : value.substr(first);
    if (key == "datatype") {
      hdr.datatype = value;
    } else if (key == "file") {
      std::istringstream vs(value);
      std::string dot;
      long long off = -1;
      vs >> dot >> off;
      if (dot != "." || off < 0)
        throw ParseError("tck-malformed-header", path, "bad 'file' field: " + value);
      hdr.offset = static_cast<std::size_t>(off);
      hdr.have_offset = true;
    }
  }
  throw ParseError("tck-malformed-header", path, "missing END line");
}

} // namespace

std::vector<Streamline> read_tck_streamlines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ParseError("tck-open-failed", path, "cannot open file");

  const TckHeader hdr = parse_header(in, path);
  if (hdr.datatype != "Float32LE")
    throw ParseError("tck-wrong-datatype", path,
                     "datatype must be Float32LE, got '" + hdr.datatype + "'");
  if (!hdr.have_offset)
    throw ParseError("tck-malformed-header", path, "missing 'file' field");

  in.seekg(static_cast<std::streamoff>(hdr.offset), std::ios::beg);
  if (!in)
    throw ParseError("tck-truncated", path, "offset beyond end of file");

  std::vector<Streamline> result;
  Streamline current;
  float triplet[3];
  while (true) {
    in.read(reinterpret_cast<char*>(triplet), sizeof(triplet));
    if (in.gcount() != sizeof(triplet))
      throw ParseError("tck-truncated", path, "binary section ended without terminator");
    if (std::isinf(triplet[0]) && std::isinf(triplet[1]) && std::isinf(triplet[2]))
      break;
    if (std::isnan(triplet[0]) || std::isnan(triplet[1]) || std::isnan(triplet[2])) {
      if (!current.points.empty()) {
        result.push_back(std::move(current));
        current = Streamline{};
      }
      continue;
    }
    current.points.emplace_back(triplet[0], triplet[1], triplet[2]);
  }
  if (!current.points.empty())
    result.push_back(std::move(current));
  return result;
}

void write_tck(const Tractogram& t, const std::string& path) {
  const std::size_t count = t.streamlines.size();

  auto compose = [&](std::size_t offset) {
    std::ostringstream hs;
    hs << "mrtrix tracks\n";
    hs << "count: " << count << "\n";
    hs << "datatype: Float32LE\n";
    hs << "total_count: " << count << "\n";
    hs << "file: . " << offset << "\n";
    hs << "END\n";
    return hs.str();
  };

  // The offset value feeds back into the header length; iterate to a
  // fixed point (converges in at most a couple of rounds).
  std::size_t offset = compose(0).size();
  while (compose(offset).size() != offset)
    offset = compose(offset).size();
  const std::string header = compose(offset);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw ParseError("tck-write-failed", path, "cannot open for writing");
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    const float nan3[3] = {std::numeric_limits<float>::quiet_NaN(),
                           std::numeric_limits<float>::quiet_NaN(),
                           std::numeric_limits<float>::quiet_NaN()};
    const float inf3[3] = {std::numeric_limits<float>::infinity(),
                           std::numeric_limits<float>::infinity(),
                           std::numeric_limits<float>::infinity()};
    for (const Streamline& s : t.streamlines) {
      for (const Vector3& p : s.points) {
        const float xyz[3] = {static_cast<float>(p[0]), static_cast<float>(p[1]),
                              static_cast<float>(p[2])};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
      }
      out.write(reinterpret_cast<const char*>(nan3), sizeof(nan3));
    }
    out.write(reinterpret_cast<const char*>(inf3), sizeof(inf3));
    if (!out)
      throw ParseError("tck-write-failed", path, "write error");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw ParseError("tck-write-failed", path, "rename failed: " + ec.message());
}

} // namespace pt
