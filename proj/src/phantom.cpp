#include "peaktrack/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "peaktrack/errors.hpp"

namespace pt {

namespace {

constexpr double kPi = std::numbers::pi;

// Parametric centerline by arc length: a line segment along +x or a
// circular arc in the xy-plane, both centered on the grid midpoint.
class Centerline {
public:
  Centerline(const BundleSpec& spec, const Vector3& grid_center_mm)
      : kind_(spec.kind), center_(grid_center_mm) {
    if (kind_ == BundleKind::straight) {
      length_ = spec.length_mm;
      p0_ = center_ - Vector3(length_ / 2.0, 0.0, 0.0);
    } else {
      radius_ = spec.radius_mm;
      sweep_ = spec.sweep_deg * kPi / 180.0;
      length_ = radius_ * sweep_;
      // Place the arc midpoint (sweep/2) on the grid center.
      arc_center_ = center_ - radius_ * Vector3(std::cos(sweep_ / 2.0),
                                                std::sin(sweep_ / 2.0), 0.0);
    }
  }

  double length() const { return length_; }

  // Point, unit tangent, and cross-section axes at arc length s.
  void frame(double s, Vector3& p, Vector3& t, Vector3& n1, Vector3& n2) const {
    if (kind_ == BundleKind::straight) {
      p = p0_ + Vector3(s, 0.0, 0.0);
      t = Vector3(1.0, 0.0, 0.0);
      n1 = Vector3(0.0, 1.0, 0.0);
      n2 = Vector3(0.0, 0.0, 1.0);
      return;
    }
    const double theta = s / radius_;
    n1 = Vector3(std::cos(theta), std::sin(theta), 0.0); // radial, outward
    p = arc_center_ + radius_ * n1;
    t = Vector3(-std::sin(theta), std::cos(theta), 0.0);
    n2 = Vector3(0.0, 0.0, 1.0);
  }

  // Unit tangent at the centerline point nearest to q.
  Vector3 tangent_at_foot(const Vector3& q) const {
    if (kind_ == BundleKind::straight) return {1.0, 0.0, 0.0};
    double theta = std::atan2(q[1] - arc_center_[1], q[0] - arc_center_[0]);
    if (theta < 0.0) theta += 2.0 * kPi;
    if (theta > sweep_) // in the gap: clamp to the nearer arc end
      theta = (theta - sweep_ < 2.0 * kPi - theta) ? sweep_ : 0.0;
    return {-std::sin(theta), std::cos(theta), 0.0};
  }

private:
  BundleKind kind_;
  Vector3 center_;
  double length_ = 0.0;
  Vector3 p0_ = Vector3::Zero();         // straight
  Vector3 arc_center_ = Vector3::Zero(); // arc / u_shape
  double radius_ = 0.0;
  double sweep_ = 0.0;
};

void validate_spec(const BundleSpec& spec) {
  if (spec.tube_radius_mm <= 0.0)
    throw DataError("phantom-bad-spec", "tube radius must be positive");
  if (spec.n_streamlines < 1)
    throw DataError("phantom-bad-spec", "need at least one streamline");
  if (spec.jitter_mm < 0.0)
    throw DataError("phantom-bad-spec", "jitter must be nonnegative");
  if (spec.kind == BundleKind::straight) {
    if (spec.length_mm <= 0.0)
      throw DataError("phantom-bad-spec", "length must be positive");
  } else {
    if (spec.radius_mm <= 0.0)
      throw DataError("phantom-bad-spec", "arc radius must be positive");
    if (spec.sweep_deg <= 0.0 || spec.sweep_deg > 270.0)
      throw DataError("phantom-bad-spec", "sweep must be in (0, 270] degrees");
    if (spec.tube_radius_mm >= spec.radius_mm)
      throw DataError("phantom-bad-spec",
                      "tube radius must be smaller than the arc radius");
  }
}

// End-cap disk at arc length s: one voxel thick along the tangent, radius
// tube_radius (+ jitter allowance), then closed and dilated once.
BinaryMask make_cap(const Centerline& line, double s, const BundleSpec& spec,
                    const GridGeometry& geom) {
  Vector3 p, t, n1, n2;
  line.frame(s, p, t, n1, n2);
  const double half_thick = geom.spacing().mean() / 2.0;
  const double max_radial = spec.tube_radius_mm + 3.0 * spec.jitter_mm;

  BinaryMask cap(geom);
  for (int k = 0; k < geom.dims()[2]; ++k)
    for (int j = 0; j < geom.dims()[1]; ++j)
      for (int i = 0; i < geom.dims()[0]; ++i) {
        const Vector3 q = geom.voxel_to_world(
            Vector3(static_cast<double>(i), static_cast<double>(j),
                    static_cast<double>(k)));
        const Vector3 d = q - p;
        const double axial = d.dot(t);
        if (std::abs(axial) > half_thick) continue;
        if ((d - axial * t).norm() > max_radial) continue;
        cap.set(i, j, k);
      }
  cap = morphology(cap, MorphOp::closing, 1);
  return morphology(cap, MorphOp::dilation, 1);
}

} // namespace

PhantomData generate_phantom(const BundleSpec& spec, const GridGeometry& geom,
                             Random& rng) {
  validate_spec(spec);
  const std::array<int, 3>& dims = geom.dims();
  const Vector3 grid_center = geom.voxel_to_world(
      Vector3((dims[0] - 1) / 2.0, (dims[1] - 1) / 2.0, (dims[2] - 1) / 2.0));
  const Centerline line(spec, grid_center);
  const double total = line.length();

  // The tube plus jitter must keep a 2-voxel margin everywhere.
  const double reach = spec.tube_radius_mm + 3.0 * spec.jitter_mm;
  const int n_check = std::max(2, static_cast<int>(std::llround(total)) + 1);
  for (int i = 0; i < n_check; ++i) {
    Vector3 p, t, n1, n2;
    line.frame(total * i / (n_check - 1), p, t, n1, n2);
    const Vector3 v = geom.world_to_voxel(p);
    for (int a = 0; a < 3; ++a) {
      const double pad = reach / geom.spacing()[a];
      if (v[a] - pad < 2.0 || v[a] + pad > dims[a] - 3.0)
        throw DataError("phantom-bundle-exceeds-grid",
                        "bundle does not fit inside the grid with a 2-voxel margin");
    }
  }

  Tractogram tractogram;
  tractogram.geometry = geom;
  const int n_pts = std::max(2, static_cast<int>(std::llround(total)) + 1);
  for (int s = 0; s < spec.n_streamlines; ++s) {
    // Constant offset in the moving frame: uniform over the tube disk plus a
    // Gaussian perpendicular jitter. Keeping the offset fixed along the line
    // makes every streamline a clean parallel curve of the centerline.
    const double phi = 2.0 * kPi * rng.uniform();
    const double r = spec.tube_radius_mm * std::sqrt(rng.uniform());
    const double c1 = r * std::cos(phi) + spec.jitter_mm * rng.normal();
    const double c2 = r * std::sin(phi) + spec.jitter_mm * rng.normal();

    Streamline sl;
    sl.points.reserve(static_cast<std::size_t>(n_pts));
    for (int i = 0; i < n_pts; ++i) {
      Vector3 p, t, n1, n2;
      line.frame(total * i / (n_pts - 1), p, t, n1, n2);
      sl.points.push_back(p + c1 * n1 + c2 * n2);
    }
    tractogram.streamlines.push_back(std::move(sl));
  }

  BinaryMask mask = voxelize(tractogram);

  OrientationMap tom(geom);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) {
        if (!mask.at(i, j, k)) continue;
        const Vector3 q = geom.voxel_to_world(
            Vector3(static_cast<double>(i), static_cast<double>(j),
                    static_cast<double>(k)));
        tom.set_peak(geom.index(i, j, k), line.tangent_at_foot(q));
      }

  BinaryMask start = make_cap(line, 0.0, spec, geom);
  BinaryMask end = make_cap(line, total, spec, geom);
  if (start.count_set() == 0 || end.count_set() == 0)
    throw DataError("phantom-bundle-exceeds-grid", "end cap fell outside the grid");
  for (std::size_t v = 0; v < geom.voxel_count(); ++v)
    if (start.data[v] && end.data[v])
      throw DataError("phantom-endcaps-overlap",
                      "end caps overlap; increase the sweep or radius");

  return PhantomData{std::move(tractogram), std::move(tom), std::move(mask),
                     EndpointRegions{std::move(start), std::move(end)}};
}

OrientationMap perturb_peaks(const OrientationMap& tom, double noise_angle_deg,
                             double dropout, Random& rng) {
  if (noise_angle_deg < 0.0)
    throw DataError("phantom-bad-spec", "noise angle must be nonnegative");
  if (dropout < 0.0 || dropout >= 1.0)
    throw DataError("phantom-bad-spec", "dropout must be in [0, 1)");

  OrientationMap out = tom;
  const double sigma = noise_angle_deg * kPi / 180.0;
  const std::size_t n = tom.geometry.voxel_count();
  for (std::size_t voxel = 0; voxel < n; ++voxel) {
    const Vector3 v = out.peak(voxel);
    const double vn = v.norm();
    if (vn < 1e-12) continue;
    if (dropout > 0.0 && rng.uniform() < dropout) {
      out.set_peak(voxel, Vector3::Zero());
      continue;
    }
    if (sigma <= 0.0) continue;

    const double angle = std::abs(rng.normal()) * sigma;
    const Vector3 u = v / vn;
    // Random rotation axis perpendicular to the peak.
    Vector3 axis;
    double an = 0.0;
    do {
      const Vector3 g(rng.normal(), rng.normal(), rng.normal());
      axis = g - g.dot(u) * u;
      an = axis.norm();
    } while (an < 1e-8);
    axis /= an;

    const double c = std::cos(angle), s = std::sin(angle);
    const Vector3 rotated = v * c + axis.cross(v) * s + axis * axis.dot(v) * (1.0 - c);
    out.set_peak(voxel, rotated);
  }
  return out;
}

} // namespace pt
