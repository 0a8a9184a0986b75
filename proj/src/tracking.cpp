#include "peaktrack/tracking.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "peaktrack/bspline.hpp"
#include "peaktrack/errors.hpp"

namespace pt {

namespace {

bool mask_at(const BinaryMask& m, const std::array<int, 3>& v) {
  return m.geometry.in_bounds(v[0], v[1], v[2]) && m.at(v[0], v[1], v[2]);
}

// Shared verdict for the post-smoothing re-check and filter_streamlines.
enum class Verdict { pass, too_short, endpoints, left_mask };

Verdict check_streamline(const Streamline& s, const GridGeometry& geom,
                         const BinaryMask& tract_mask, const BinaryMask& start_mask,
                         const BinaryMask& end_mask, double min_length_mm) {
  if (s.points.size() < 2) return Verdict::left_mask;
  for (const Vector3& p : s.points) {
    const auto v = geom.nearest_voxel(geom.world_to_voxel(p));
    if (!mask_at(tract_mask, v)) return Verdict::left_mask;
  }
  const auto first = geom.nearest_voxel(geom.world_to_voxel(s.points.front()));
  const auto last = geom.nearest_voxel(geom.world_to_voxel(s.points.back()));
  const bool fwd = mask_at(start_mask, first) && mask_at(end_mask, last);
  const bool bwd = mask_at(end_mask, first) && mask_at(start_mask, last);
  if (!fwd && !bwd) return Verdict::endpoints;
  if (arc_length(s) < min_length_mm) return Verdict::too_short;
  return Verdict::pass;
}

RejectReason to_reject(Verdict v) {
  switch (v) {
    case Verdict::too_short: return RejectReason::too_short;
    case Verdict::endpoints: return RejectReason::endpoint_not_in_regions;
    default: return RejectReason::left_mask_degenerate;
  }
}

// March from `seed` (excluded from the output) along `first_dir` until the
// next position's voxel leaves the tract mask, the interpolated peak
// degenerates, or max_steps is reached.
std::vector<Vector3> march(const TrackingContext& ctx, const Vector3& seed,
                           const Vector3& first_dir, const TrackerConfig& cfg,
                           Random& rng) {
  std::vector<Vector3> out;
  Vector3 pos = seed;
  Vector3 prev = first_dir;
  for (int step = 0; step < cfg.max_steps; ++step) {
    const Vector3 peak = interpolate_peak(ctx.tom, pos, prev);
    if (peak.norm() < cfg.peak_eps) break;
    Vector3 dir;
    if (cfg.mode == TrackingMode::probabilistic)
      dir = sample_direction(peak, cfg.gaussian_std, rng);
    else
      dir = peak.normalized();
    const Vector3 next = pos + cfg.step_size_vox * dir;
    if (!mask_at(ctx.tract_mask, ctx.tom.geometry.nearest_voxel(next))) break;
    out.push_back(next);
    pos = next;
    prev = dir;
  }
  return out;
}

} // namespace

TrackingContext::TrackingContext(OrientationMap tom_, BinaryMask tract,
                                 BinaryMask start, BinaryMask end)
    : tom(std::move(tom_)),
      tract_mask(std::move(tract)),
      start_mask(std::move(start)),
      end_mask(std::move(end)) {
  if (!tom.geometry.compatible(tract_mask.geometry) ||
      !tom.geometry.compatible(start_mask.geometry) ||
      !tom.geometry.compatible(end_mask.geometry))
    throw DataError("tracking-geometry-mismatch",
                    "orientation map and masks must share one grid");
}

Vector3 sample_direction(const Vector3& peak, double std, Random& rng) {
  const double n = peak.norm();
  if (!(n > 0.0))
    throw DataError("tracking-zero-peak", "cannot sample a direction from a zero peak");
  const Vector3 u = peak / n;
  if (std <= 0.0) return u;
  Vector3 v;
  double vn = 0.0;
  do {
    const Vector3 g(rng.normal(), rng.normal(), rng.normal());
    v = u + std * g;
    vn = v.norm();
  } while (vn < 1e-12); // noise exactly cancelling u is measure-zero
  return v / vn;
}

Vector3 interpolate_peak(const OrientationMap& tom, const Vector3& pos_vox,
                         const std::optional<Vector3>& prev_dir) {
  const GridGeometry& g = tom.geometry;
  Vector3 ref = Vector3::Zero();
  if (prev_dir) {
    ref = *prev_dir;
  } else {
    const auto nv = g.nearest_voxel(pos_vox);
    if (g.in_bounds(nv[0], nv[1], nv[2])) ref = tom.peak(g.index(nv[0], nv[1], nv[2]));
  }

  std::array<int, 3> base{};
  Vector3 frac;
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor(pos_vox[a]);
    base[a] = static_cast<int>(f);
    frac[a] = pos_vox[a] - f;
  }

  Vector3 acc = Vector3::Zero();
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj)
      for (int dk = 0; dk < 2; ++dk) {
        const int ci = base[0] + di, cj = base[1] + dj, ck = base[2] + dk;
        if (!g.in_bounds(ci, cj, ck)) continue;
        const double w = (di ? frac[0] : 1.0 - frac[0]) *
                         (dj ? frac[1] : 1.0 - frac[1]) *
                         (dk ? frac[2] : 1.0 - frac[2]);
        if (w == 0.0) continue;
        Vector3 p = tom.peak(g.index(ci, cj, ck));
        if (p.dot(ref) < 0.0) p = -p;
        acc += w * p;
      }
  return acc;
}

TrackResult track_streamline(const TrackingContext& ctx, const Vector3& seed_vox,
                             const TrackerConfig& cfg, Random& rng) {
  TrackResult res;
  const GridGeometry& g = ctx.tom.geometry;

  const auto sv = g.nearest_voxel(seed_vox);
  if (!mask_at(ctx.tract_mask, sv)) {
    res.reject = RejectReason::left_mask_degenerate;
    return res;
  }
  const Vector3 seed_peak = ctx.tom.peak(g.index(sv[0], sv[1], sv[2]));
  if (seed_peak.norm() < cfg.peak_eps) {
    res.reject = RejectReason::left_mask_degenerate;
    return res;
  }
  const Vector3 u0 = seed_peak.normalized();

  const std::vector<Vector3> fwd = march(ctx, seed_vox, u0, cfg, rng);
  const std::vector<Vector3> bwd = march(ctx, seed_vox, -u0, cfg, rng);

  Streamline raw;
  raw.points.reserve(bwd.size() + 1 + fwd.size());
  for (auto it = bwd.rbegin(); it != bwd.rend(); ++it)
    raw.points.push_back(g.voxel_to_world(*it));
  raw.points.push_back(g.voxel_to_world(seed_vox));
  for (const Vector3& p : fwd) raw.points.push_back(g.voxel_to_world(p));

  const Verdict pre = check_streamline(raw, g, ctx.tract_mask, ctx.start_mask,
                                       ctx.end_mask, cfg.min_length_mm);
  if (pre != Verdict::pass) {
    res.reject = to_reject(pre);
    return res;
  }

  const double step_mm = cfg.step_size_vox * g.spacing().mean();
  Streamline smoothed =
      smooth_bspline(raw, static_cast<double>(raw.points.size()), step_mm);

  const Verdict post = check_streamline(smoothed, g, ctx.tract_mask, ctx.start_mask,
                                        ctx.end_mask, cfg.min_length_mm);
  if (post != Verdict::pass) {
    res.reject = to_reject(post);
    return res;
  }
  res.streamline = std::move(smoothed);
  return res;
}

BundleResult track_bundle(const TrackingContext& ctx, const TrackerConfig& cfg,
                          int n_threads) {
  const GridGeometry& g = ctx.tom.geometry;
  std::vector<std::array<int, 3>> set_voxels;
  for (int k = 0; k < g.dims()[2]; ++k)
    for (int j = 0; j < g.dims()[1]; ++j)
      for (int i = 0; i < g.dims()[0]; ++i)
        if (ctx.tract_mask.at(i, j, k)) set_voxels.push_back({i, j, k});
  if (set_voxels.empty())
    throw DataError("track-empty-mask", "tract mask has no set voxels, nowhere to seed");

  if (n_threads < 1) n_threads = 1;
  const std::uint64_t max_attempts =
      static_cast<std::uint64_t>(cfg.max_attempt_factor) *
      static_cast<std::uint64_t>(cfg.target_count);
  const std::uint64_t block =
      std::max<std::uint64_t>(64, static_cast<std::uint64_t>(4 * n_threads));

  auto run_attempt = [&](std::uint64_t attempt) -> std::optional<Streamline> {
    Random rng(substream(cfg.master_seed, attempt));
    const std::size_t pick = std::min<std::size_t>(
        static_cast<std::size_t>(rng.uniform() * static_cast<double>(set_voxels.size())),
        set_voxels.size() - 1);
    const std::array<int, 3>& v = set_voxels[pick];
    Vector3 seed;
    for (int a = 0; a < 3; ++a) {
      double off = rng.uniform() - 0.5;
      if (off == -0.5) off = 0.0; // keep the seed rounding back to its own voxel
      seed[a] = static_cast<double>(v[a]) + off;
    }
    TrackResult r = track_streamline(ctx, seed, cfg, rng);
    return std::move(r.streamline);
  };

  BundleResult out;
  out.tractogram.geometry = g;
  const auto target = static_cast<std::uint64_t>(cfg.target_count);

  std::uint64_t next_attempt = 0;
  while (next_attempt < max_attempts && out.accepted < target) {
    const std::uint64_t n = std::min<std::uint64_t>(block, max_attempts - next_attempt);
    std::vector<std::optional<Streamline>> results(n);

    if (n_threads == 1) {
      for (std::uint64_t idx = 0; idx < n; ++idx)
        results[idx] = run_attempt(next_attempt + idx);
    } else {
      std::atomic<std::uint64_t> cursor{0};
      std::exception_ptr first_error;
      std::mutex error_mutex;
      std::vector<std::thread> workers;
      workers.reserve(static_cast<std::size_t>(n_threads));
      for (int t = 0; t < n_threads; ++t)
        workers.emplace_back([&] {
          for (;;) {
            const std::uint64_t idx = cursor.fetch_add(1);
            if (idx >= n) return;
            try {
              results[idx] = run_attempt(next_attempt + idx);
            } catch (...) {
              std::lock_guard<std::mutex> lock(error_mutex);
              if (!first_error) first_error = std::current_exception();
              return;
            }
          }
        });
      for (auto& w : workers) w.join();
      if (first_error) std::rethrow_exception(first_error);
    }

    // Harvest strictly in attempt order so the accepted set is independent
    // of thread scheduling.
    for (std::uint64_t idx = 0; idx < n && out.accepted < target; ++idx) {
      out.attempts = next_attempt + idx + 1;
      if (results[idx]) {
        out.tractogram.streamlines.push_back(std::move(*results[idx]));
        ++out.accepted;
      }
    }
    next_attempt += n;
  }
  if (out.accepted < target) {
    out.attempts = max_attempts;
    out.attempt_budget_exhausted = true;
  }
  return out;
}

Tractogram filter_streamlines(const Tractogram& t, const BinaryMask& tract_mask,
                              const BinaryMask& start_mask, const BinaryMask& end_mask,
                              double min_length_mm) {
  Tractogram out;
  out.geometry = t.geometry;
  for (const Streamline& s : t.streamlines)
    if (check_streamline(s, tract_mask.geometry, tract_mask, start_mask, end_mask,
                         min_length_mm) == Verdict::pass)
      out.streamlines.push_back(s);
  return out;
}

namespace {

// Best original peak of one voxel: smallest axial angle to the unit vector
// `dir`, sign-flipped toward it. Empty when all three peaks are (near) zero.
std::optional<Vector3> best_peak(const PeakImage& peaks, std::size_t voxel,
                                 const Vector3& dir) {
  std::optional<Vector3> best;
  double best_cos = -1.0;
  for (int w = 0; w < 3; ++w) {
    const Vector3 p = peaks.peak(voxel, w);
    const double pn = p.norm();
    if (pn < 1e-12) continue;
    const double c = std::abs(p.dot(dir)) / pn;
    if (c > best_cos) {
      best_cos = c;
      best = (p.dot(dir) < 0.0) ? Vector3(-p) : p;
    }
  }
  return best;
}

} // namespace

OrientationMap select_best_original_peak(const PeakImage& peaks,
                                         const OrientationMap& tom) {
  if (!peaks.geometry.compatible(tom.geometry))
    throw DataError("tracking-geometry-mismatch",
                    "peak image and orientation map must share one grid");
  OrientationMap out(tom.geometry);
  const std::size_t n = tom.geometry.voxel_count();
  for (std::size_t voxel = 0; voxel < n; ++voxel) {
    const Vector3 t = tom.peak(voxel);
    const double tn = t.norm();
    if (tn < 1e-12) continue;
    const auto b = best_peak(peaks, voxel, Vector3(t / tn));
    if (b) out.set_peak(voxel, *b);
  }
  return out;
}

OrientationMap fuse_prior(const OrientationMap& tom, const PeakImage& peaks,
                          double weight) {
  if (!peaks.geometry.compatible(tom.geometry))
    throw DataError("tracking-geometry-mismatch",
                    "peak image and orientation map must share one grid");
  if (weight < 0.0 || weight > 1.0)
    throw DataError("tracking-bad-weight", "fusion weight must be in [0, 1]");
  OrientationMap out(tom.geometry);
  const std::size_t n = tom.geometry.voxel_count();
  for (std::size_t voxel = 0; voxel < n; ++voxel) {
    const Vector3 t = tom.peak(voxel);
    const double tn = t.norm();
    if (tn < 1e-12) continue;
    const Vector3 u = t / tn;
    const auto b = best_peak(peaks, voxel, u);
    if (!b) {
      out.set_peak(voxel, u);
      continue;
    }
    // The best peak is already sign-aligned with u, so the blend cannot
    // cancel: |f| >= max(weight, 1 - weight) / sqrt(2).
    const Vector3 bu = b->normalized();
    const Vector3 f = weight * u + (1.0 - weight) * bu;
    const double fn = f.norm();
    out.set_peak(voxel, fn < 1e-12 ? u : Vector3(f / fn));
  }
  return out;
}

} // namespace pt
