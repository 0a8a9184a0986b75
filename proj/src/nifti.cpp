#include "peaktrack/nifti.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <vector>

#include <zlib.h>

#include "peaktrack/errors.hpp"

namespace pt {

namespace {

// NIfTI-1 header, 348 bytes. Field offsets match the reference layout.
#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope, scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min, slice_duration, toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code, sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr std::int16_t DT_UINT8 = 2;
constexpr std::int16_t DT_INT16 = 4;
constexpr std::int16_t DT_INT32 = 8;
constexpr std::int16_t DT_FLOAT32 = 16;
constexpr std::int16_t DT_FLOAT64 = 64;

class GzFile {
public:
  GzFile(const std::string& path, const char* mode) : path_(path) {
    f_ = gzopen(path.c_str(), mode);
    if (!f_)
      throw ParseError("nifti-open-failed", path, "cannot open file");
  }
  ~GzFile() {
    if (f_)
      gzclose(f_);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;

  void read(void* buf, std::size_t n) {
    const int got = gzread(f_, buf, static_cast<unsigned>(n));
    if (got < 0 || static_cast<std::size_t>(got) != n)
      throw ParseError("nifti-truncated", path_, "unexpected end of file");
  }
  void write(const void* buf, std::size_t n) {
    if (gzwrite(f_, buf, static_cast<unsigned>(n)) != static_cast<int>(n))
      throw ParseError("nifti-write-failed", path_, "write error");
  }
  void close() {
    if (f_ && gzclose(f_) != Z_OK) {
      f_ = nullptr;
      throw ParseError("nifti-write-failed", path_, "close error");
    }
    f_ = nullptr;
  }

private:
  std::string path_;
  gzFile f_ = nullptr;
};

struct RawVolume {
  Nifti1Header hdr;
  std::vector<char> payload; // raw bytes for dim[1]*dim[2]*dim[3]*channels voxels
  GridGeometry geometry;
  int channels;
};

Matrix4 affine_from_header(const Nifti1Header& h) {
  Matrix4 a = Matrix4::Identity();
  if (h.sform_code > 0) {
    for (int c = 0; c < 4; ++c) {
      a(0, c) = h.srow_x[c];
      a(1, c) = h.srow_y[c];
      a(2, c) = h.srow_z[c];
    }
    return a;
  }
  if (h.qform_code > 0) {
    const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
    const double a0sq = 1.0 - (b * b + c * c + d * d);
    const double q = a0sq > 0.0 ? std::sqrt(a0sq) : 0.0;
    Eigen::Matrix3d r;
    r << q * q + b * b - c * c - d * d, 2 * (b * c - q * d), 2 * (b * d + q * c),
        2 * (b * c + q * d), q * q + c * c - b * b - d * d, 2 * (c * d - q * b),
        2 * (b * d - q * c), 2 * (c * d + q * b), q * q + d * d - b * b - c * c;
    const double qfac = (h.pixdim[0] < 0.0f) ? -1.0 : 1.0;
    for (int col = 0; col < 3; ++col) {
      double s = h.pixdim[col + 1];
      if (col == 2)
        s *= qfac;
      a.block<3, 1>(0, col) = r.col(col) * s;
    }
    a(0, 3) = h.qoffset_x;
    a(1, 3) = h.qoffset_y;
    a(2, 3) = h.qoffset_z;
    return a;
  }
  for (int c = 0; c < 3; ++c)
    a(c, c) = h.pixdim[c + 1] != 0.0f ? h.pixdim[c + 1] : 1.0;
  return a;
}

std::size_t dtype_size(std::int16_t dt, const std::string& path) {
  switch (dt) {
  case DT_UINT8: return 1;
  case DT_INT16: return 2;
  case DT_INT32: return 4;
  case DT_FLOAT32: return 4;
  case DT_FLOAT64: return 8;
  default:
    throw ParseError("nifti-unsupported-datatype", path,
                     "unsupported datatype code " + std::to_string(dt));
  }
}

RawVolume read_raw(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw ParseError("nifti-open-failed", path, "file does not exist");
  GzFile f(path, "rb");
  Nifti1Header h{};
  f.read(&h, sizeof(h));
  if (h.sizeof_hdr != 348) {
    std::int32_t swapped;
    char* p = reinterpret_cast<char*>(&h.sizeof_hdr);
    char q[4] = {p[3], p[2], p[1], p[0]};
    std::memcpy(&swapped, q, 4);
    if (swapped == 348)
      throw ParseError("nifti-byte-swapped", path, "big-endian NIfTI is not supported");
    throw ParseError("nifti-bad-header", path, "sizeof_hdr is not 348");
  }
  if (std::strncmp(h.magic, "n+1", 3) != 0) {
    if (std::strncmp(h.magic, "ni1", 3) == 0)
      throw ParseError("nifti-bad-header", path, "two-file NIfTI (.hdr/.img) is not supported");
    throw ParseError("nifti-bad-header", path, "bad magic string");
  }
  if (h.dim[0] < 3 || h.dim[0] > 7)
    throw ParseError("nifti-bad-header", path, "expected a 3-D or 4-D volume");
  for (int c = 1; c <= h.dim[0]; ++c)
    if (h.dim[c] <= 0)
      throw ParseError("nifti-bad-header", path, "non-positive dimension");

  int channels = 1;
  if (h.dim[0] >= 4) {
    channels = h.dim[4];
    for (int c = 5; c <= h.dim[0]; ++c)
      if (h.dim[c] != 1)
        throw ParseError("nifti-bad-header", path, "dimensions above 4 must be 1");
  }

  const std::array<int, 3> dims = {h.dim[1], h.dim[2], h.dim[3]};
  const std::size_t nvox =
      static_cast<std::size_t>(dims[0]) * dims[1] * dims[2] * channels;
  const std::size_t elem = dtype_size(h.datatype, path);

  const std::size_t offset = static_cast<std::size_t>(h.vox_offset);
  if (offset < 348)
    throw ParseError("nifti-bad-header", path, "vox_offset below header size");
  std::vector<char> skip(offset - 348);
  if (!skip.empty())
    f.read(skip.data(), skip.size());

  RawVolume out{h, {}, GridGeometry(dims, affine_from_header(h)), channels};
  out.payload.resize(nvox * elem);
  f.read(out.payload.data(), out.payload.size());
  return out;
}

// Payload converted to float, honoring scl_slope/scl_inter.
std::vector<float> to_float(const RawVolume& v) {
  const std::size_t n = v.payload.size() / dtype_size(v.hdr.datatype, "");
  std::vector<float> out(n);
  const char* p = v.payload.data();
  switch (v.hdr.datatype) {
  case DT_UINT8:
    for (std::size_t i = 0; i < n; ++i)
      out[i] = static_cast<float>(reinterpret_cast<const std::uint8_t*>(p)[i]);
    break;
  case DT_INT16: {
    std::int16_t x;
    for (std::size_t i = 0; i < n; ++i) {
      std::memcpy(&x, p + 2 * i, 2);
      out[i] = static_cast<float>(x);
    }
    break;
  }
  case DT_INT32: {
    std::int32_t x;
    for (std::size_t i = 0; i < n; ++i) {
      std::memcpy(&x, p + 4 * i, 4);
      out[i] = static_cast<float>(x);
    }
    break;
  }
  case DT_FLOAT32:
    out.assign(reinterpret_cast<const float*>(p), reinterpret_cast<const float*>(p) + n);
    break;
  case DT_FLOAT64: {
    double x;
    for (std::size_t i = 0; i < n; ++i) {
      std::memcpy(&x, p + 8 * i, 8);
      out[i] = static_cast<float>(x);
    }
    break;
  }
  }
  const float slope = v.hdr.scl_slope;
  const float inter = v.hdr.scl_inter;
  if (slope != 0.0f && (slope != 1.0f || inter != 0.0f))
    for (auto& x : out)
      x = x * slope + inter;
  return out;
}

Nifti1Header make_header(const GridGeometry& geom, int channels, std::int16_t dtype) {
  Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = channels > 1 ? 4 : 3;
  h.dim[1] = static_cast<std::int16_t>(geom.dims()[0]);
  h.dim[2] = static_cast<std::int16_t>(geom.dims()[1]);
  h.dim[3] = static_cast<std::int16_t>(geom.dims()[2]);
  h.dim[4] = static_cast<std::int16_t>(channels > 1 ? channels : 1);
  for (int c = h.dim[0] + 1; c < 8; ++c)
    h.dim[c] = 1;
  h.datatype = dtype;
  h.bitpix = static_cast<std::int16_t>(dtype_size(dtype, "") * 8);
  h.pixdim[0] = 1.0f;
  for (int c = 0; c < 3; ++c)
    h.pixdim[c + 1] = static_cast<float>(geom.spacing()[c]);
  h.pixdim[4] = 1.0f;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2; // mm
  h.qform_code = 0;
  h.sform_code = 1;
  const Matrix4& a = geom.affine();
  for (int c = 0; c < 4; ++c) {
    h.srow_x[c] = static_cast<float>(a(0, c));
    h.srow_y[c] = static_cast<float>(a(1, c));
    h.srow_z[c] = static_cast<float>(a(2, c));
  }
  std::memcpy(h.magic, "n+1", 4);
  return h;
}

void write_raw(const std::string& path, const Nifti1Header& h, const void* payload,
               std::size_t payload_bytes) {
  const std::string tmp = path + ".tmp";
  const bool gzip = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
  {
    // "T" writes transparently (no gzip wrapper) for plain .nii output.
    GzFile f(tmp, gzip ? "wb" : "wbT");
    f.write(&h, sizeof(h));
    const char pad[4] = {0, 0, 0, 0};
    f.write(pad, 4);
    f.write(payload, payload_bytes);
    f.close();
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw ParseError("nifti-write-failed", path, "rename failed: " + ec.message());
}

} // namespace

GridGeometry read_nifti_geometry(const std::string& path) {
  return read_raw(path).geometry;
}

BinaryMask read_mask(const std::string& path) {
  RawVolume raw = read_raw(path);
  if (raw.channels != 1)
    throw ParseError("nifti-wrong-shape", path, "mask must have a single channel");
  const std::vector<float> vals = to_float(raw);
  BinaryMask mask(raw.geometry);
  for (std::size_t i = 0; i < vals.size(); ++i)
    mask.data[i] = vals[i] != 0.0f ? 1 : 0;
  return mask;
}

namespace {

// NIfTI stores channels as the slowest axis; our in-memory layout is
// channel-fastest per voxel. Converts between the two.
std::vector<float> interleave_channels(const std::vector<float>& planar,
                                       std::size_t nvox, int channels) {
  std::vector<float> out(planar.size());
  for (int c = 0; c < channels; ++c)
    for (std::size_t v = 0; v < nvox; ++v)
      out[v * channels + c] = planar[static_cast<std::size_t>(c) * nvox + v];
  return out;
}

std::vector<float> planarize_channels(const std::vector<float>& interleaved,
                                      std::size_t nvox, int channels) {
  std::vector<float> out(interleaved.size());
  for (int c = 0; c < channels; ++c)
    for (std::size_t v = 0; v < nvox; ++v)
      out[static_cast<std::size_t>(c) * nvox + v] = interleaved[v * channels + c];
  return out;
}

} // namespace

OrientationMap read_tom(const std::string& path) {
  RawVolume raw = read_raw(path);
  if (raw.channels != 3)
    throw ParseError("nifti-wrong-shape", path, "orientation map must have 3 channels");
  OrientationMap tom(raw.geometry);
  tom.data = interleave_channels(to_float(raw), raw.geometry.voxel_count(), 3);
  return tom;
}

PeakImage read_peaks(const std::string& path) {
  RawVolume raw = read_raw(path);
  if (raw.channels != 9)
    throw ParseError("nifti-wrong-shape", path, "peak image must have 9 channels");
  PeakImage peaks(raw.geometry);
  peaks.data = interleave_channels(to_float(raw), raw.geometry.voxel_count(), 9);
  return peaks;
}

void write_mask(const BinaryMask& mask, const std::string& path) {
  Nifti1Header h = make_header(mask.geometry, 1, DT_UINT8);
  write_raw(path, h, mask.data.data(), mask.data.size());
}

void write_tom(const OrientationMap& tom, const std::string& path) {
  Nifti1Header h = make_header(tom.geometry, 3, DT_FLOAT32);
  const auto planar = planarize_channels(tom.data, tom.geometry.voxel_count(), 3);
  write_raw(path, h, planar.data(), planar.size() * sizeof(float));
}

void write_peaks(const PeakImage& peaks, const std::string& path) {
  Nifti1Header h = make_header(peaks.geometry, 9, DT_FLOAT32);
  const auto planar = planarize_channels(peaks.data, peaks.geometry.voxel_count(), 9);
  write_raw(path, h, planar.data(), planar.size() * sizeof(float));
}

} // namespace pt
