// peaktrack: bundle-specific streamline tractography on tract orientation
// maps. Subcommands cover the full pipeline: phantom data generation,
// reference preprocessing (mask / endpoint regions / TOM), tracking,
// filtering, and evaluation.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "peaktrack/errors.hpp"
#include "peaktrack/metrics.hpp"
#include "peaktrack/nifti.hpp"
#include "peaktrack/phantom.hpp"
#include "peaktrack/reference_prep.hpp"
#include "peaktrack/rng.hpp"
#include "peaktrack/tck.hpp"
#include "peaktrack/tracking.hpp"

namespace fs = std::filesystem;

namespace {

std::string iso_utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f)
      throw pt::ParseError("file-open-failed", tmp, "cannot open for writing");
    f << content;
    f.flush();
    if (!f) throw pt::ParseError("file-write-failed", tmp, "write failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw pt::ParseError("file-rename-failed", path, "cannot move temp file into place");
}

// Shortest decimal text that parses back to the same double.
std::string format_double(double value) {
  for (int prec = 1; prec <= 17; ++prec) {
    std::ostringstream o;
    o << std::setprecision(prec) << value;
    if (std::stod(o.str()) == value)
      return o.str();
  }
  std::ostringstream o;
  o << std::setprecision(17) << value;
  return o.str();
}

// Manifest sibling of an output: the extension (including a compression
// suffix) is replaced by "_manifest.txt", e.g. "bundle.tck" ->
// "bundle_manifest.txt" and "mask.nii.gz" -> "mask_manifest.txt".
std::string manifest_path(std::string out) {
  if (out.size() > 3 && out.compare(out.size() - 3, 3, ".gz") == 0)
    out.erase(out.size() - 3);
  const auto dot = out.find_last_of('.');
  const auto sep = out.find_last_of('/');
  if (dot != std::string::npos && dot != 0 &&
      (sep == std::string::npos || dot > sep + 1))
    out.erase(dot);
  return out + "_manifest.txt";
}

// Flat key = value provenance record written next to a command's output.
class Manifest {
public:
  explicit Manifest(const std::string& command) {
    add("command", command);
    add("timestamp", iso_utc_now());
  }

  void add(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, value);
  }
  void add(const std::string& key, const char* value) { add(key, std::string(value)); }
  void add(const std::string& key, double value) { add(key, format_double(value)); }
  template <typename T>
    requires std::is_integral_v<T>
  void add(const std::string& key, T value) {
    add(key, std::to_string(value));
  }

  void write(const std::string& path) const {
    std::ostringstream o;
    for (const auto& [k, v] : entries_) o << k << " = " << v << "\n";
    write_text_atomic(path, o.str());
  }

private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// The thread cap may be overridden from the environment; it never affects
// tracking output, only wall time.
int effective_threads(int flag_threads) {
  if (const char* env = std::getenv("PEAKTRACK_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != nullptr && *end == '\0' && v >= 1 && v <= 1024)
      return static_cast<int>(v);
  }
  return flag_threads < 1 ? 1 : flag_threads;
}

void require_same_grid(const pt::GridGeometry& ref, const std::string& ref_path,
                       const pt::GridGeometry& other, const std::string& other_path) {
  if (!ref.compatible(other))
    throw pt::ParseError("geometry-mismatch", other_path,
                         "grid differs from " + ref_path);
}

// ------------------------------------------------------------- config files
//
// Subcommands accept a flat `key = value` config file via --config. The file
// is expanded into option tokens spliced in right after the subcommand name,
// and scalar options take their last occurrence, so flags given explicitly on
// the command line override file values no matter where they appear.

std::vector<std::pair<std::string, std::string>>
read_flat_config(const std::string& path) {
  std::ifstream f(path);
  if (!f)
    throw CLI::FileError(path + ": cannot open config file");

  const auto trim = [](const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };

  std::vector<std::pair<std::string, std::string>> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#')
      continue;
    const auto eq = t.find('=');
    const std::string where = path + ":" + std::to_string(lineno);
    if (eq == std::string::npos)
      throw CLI::ValidationError(where + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw CLI::ValidationError(where + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    items.emplace_back(key, value);
  }
  return items;
}

void splice_config_tokens(CLI::App& app, std::vector<std::string>& tokens) {
  std::size_t sub_pos = tokens.size();
  CLI::App* sub = nullptr;
  for (std::size_t i = 0; i < tokens.size() && sub == nullptr; ++i)
    for (CLI::App* s : app.get_subcommands([](CLI::App*) { return true; }))
      if (s->get_name() == tokens[i]) {
        sub = s;
        sub_pos = i;
        break;
      }
  if (sub == nullptr)
    return;

  std::string cfg_path;
  for (std::size_t i = sub_pos + 1; i < tokens.size(); ++i) {
    if (tokens[i] == "--config") {
      if (i + 1 >= tokens.size())
        throw CLI::ValidationError("--config: requires a file path");
      cfg_path = tokens[i + 1];
      ++i;
    } else if (tokens[i].rfind("--config=", 0) == 0) {
      cfg_path = tokens[i].substr(9);
    }
  }
  if (cfg_path.empty())
    return;

  std::vector<std::string> injected;
  for (const auto& [key, value] : read_flat_config(cfg_path)) {
    const std::string flag = "--" + key;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr || key == "config" || key == "help")
      throw CLI::ValidationError(cfg_path + ": unknown " + sub->get_name() +
                                 " option '" + key + "'");
    injected.push_back(flag);
    injected.push_back(value);
  }
  tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1,
                injected.begin(), injected.end());
}

// Last occurrence wins for every scalar option, giving explicit flags
// precedence over spliced config values.
void take_last_everywhere(CLI::App& app) {
  for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; }))
    for (CLI::Option* opt : sub->get_options([](CLI::Option*) { return true; }))
      if (opt->get_expected_min() >= 1 &&
          opt->get_multi_option_policy() == CLI::MultiOptionPolicy::Throw)
        opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

// ---------------------------------------------------------------- phantom

struct PhantomOpts {
  std::string kind = "straight";
  double length = 100.0;
  double radius = 40.0;
  double sweep = 90.0;
  double tube_radius = 5.0;
  int count = 300;
  double jitter = 0.3;
  double noise_angle = 0.0;
  double dropout = 0.0;
  int dims = 50;
  double spacing = 2.5;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string prefix = "phantom";
  std::string config;
  CLI::Option* radius_opt = nullptr;
  CLI::Option* sweep_opt = nullptr;
};

void run_phantom(const PhantomOpts& o) {
  pt::BundleSpec spec;
  if (o.kind == "straight")
    spec.kind = pt::BundleKind::straight;
  else if (o.kind == "arc")
    spec.kind = pt::BundleKind::arc;
  else
    spec.kind = pt::BundleKind::u_shape;
  spec.length_mm = o.length;
  spec.radius_mm = o.radius;
  spec.sweep_deg = o.sweep;
  // A u-shape defaults to the tight high-curvature preset unless overridden.
  if (spec.kind == pt::BundleKind::u_shape) {
    if (o.radius_opt->count() == 0) spec.radius_mm = 15.0;
    if (o.sweep_opt->count() == 0) spec.sweep_deg = 240.0;
  }
  spec.tube_radius_mm = o.tube_radius;
  spec.n_streamlines = o.count;
  spec.jitter_mm = o.jitter;
  spec.noise_angle_deg = o.noise_angle;
  spec.dropout = o.dropout;

  const pt::GridGeometry geom({o.dims, o.dims, o.dims},
                              pt::Vector3(o.spacing, o.spacing, o.spacing));
  pt::Random rng(o.seed);
  const pt::PhantomData data = pt::generate_phantom(spec, geom, rng);

  fs::create_directories(o.out_dir);
  const auto path = [&](const char* suffix) {
    return (fs::path(o.out_dir) / (o.prefix + suffix)).string();
  };

  pt::write_tck(data.tractogram, path("_streamlines.tck"));
  pt::write_tom(data.tom_gt, path("_tom_gt.nii.gz"));
  pt::OrientationMap tom = data.tom_gt;
  if (spec.noise_angle_deg > 0.0 || spec.dropout > 0.0)
    tom = pt::perturb_peaks(tom, spec.noise_angle_deg, spec.dropout, rng);
  pt::write_tom(tom, path("_tom.nii.gz"));
  pt::write_mask(data.tract_mask_gt, path("_mask.nii.gz"));
  pt::write_mask(data.endpoints_gt.start, path("_start.nii.gz"));
  pt::write_mask(data.endpoints_gt.end, path("_end.nii.gz"));

  Manifest m("phantom");
  m.add("kind", o.kind);
  if (spec.kind == pt::BundleKind::straight)
    m.add("length_mm", spec.length_mm);
  else {
    m.add("radius_mm", spec.radius_mm);
    m.add("sweep_deg", spec.sweep_deg);
  }
  m.add("tube_radius_mm", spec.tube_radius_mm);
  m.add("n_streamlines", spec.n_streamlines);
  m.add("jitter_mm", spec.jitter_mm);
  m.add("noise_angle_deg", spec.noise_angle_deg);
  m.add("dropout", spec.dropout);
  m.add("dims", o.dims);
  m.add("spacing_mm", o.spacing);
  m.add("master_seed", o.seed);
  m.add("out_streamlines", path("_streamlines.tck"));
  m.add("out_tom", path("_tom.nii.gz"));
  m.add("out_tom_gt", path("_tom_gt.nii.gz"));
  m.add("out_mask", path("_mask.nii.gz"));
  m.add("out_start", path("_start.nii.gz"));
  m.add("out_end", path("_end.nii.gz"));
  m.add("mask_voxels", data.tract_mask_gt.count_set());
  if (!o.config.empty()) m.add("config", o.config);
  m.write(path("_manifest.txt"));
}

void setup_phantom(CLI::App& app) {
  auto o = std::make_shared<PhantomOpts>();
  CLI::App* sub = app.add_subcommand(
      "phantom", "Generate an analytic tube-bundle phantom with ground truth");
  sub->add_option("--kind", o->kind, "Centerline shape")
      ->check(CLI::IsMember({"straight", "arc", "u_shape"}))
      ->capture_default_str();
  sub->add_option("--length", o->length, "Straight-bundle length, mm")
      ->capture_default_str();
  o->radius_opt =
      sub->add_option("--radius", o->radius, "Arc radius, mm (u_shape default: 15)")
          ->capture_default_str();
  o->sweep_opt =
      sub->add_option("--sweep", o->sweep, "Arc sweep, degrees (u_shape default: 240)")
          ->capture_default_str();
  sub->add_option("--tube-radius", o->tube_radius, "Tube radius, mm")
      ->capture_default_str();
  sub->add_option("--count", o->count, "Streamlines to generate")
      ->capture_default_str();
  sub->add_option("--jitter", o->jitter,
                  "Gaussian jitter of each streamline's radial offset, mm")
      ->capture_default_str();
  sub->add_option("--noise-angle", o->noise_angle,
                  "Peak perturbation angle sigma, degrees (applied to the tom output)")
      ->capture_default_str();
  sub->add_option("--dropout", o->dropout,
                  "Fraction of nonzero tom voxels zeroed (applied to the tom output)")
      ->capture_default_str();
  sub->add_option("--dims", o->dims, "Cubic grid size, voxels per axis")
      ->capture_default_str();
  sub->add_option("--spacing", o->spacing, "Isotropic voxel spacing, mm")
      ->capture_default_str();
  sub->add_option("--seed", o->seed, "Master RNG seed")->capture_default_str();
  sub->add_option("--out-dir", o->out_dir, "Output directory")->required();
  sub->add_option("--prefix", o->prefix, "Output filename prefix")
      ->capture_default_str();
  sub->add_option("--config", o->config,
                  "Flat key = value option file; explicit flags override it");
  sub->callback([o] { run_phantom(*o); });
}

// --------------------------------------------------------------- make-mask

struct MakeMaskOpts {
  std::string tractogram;
  std::string geometry;
  std::string out;
  std::string config;
};

void run_make_mask(const MakeMaskOpts& o) {
  const pt::GridGeometry geom = pt::read_nifti_geometry(o.geometry);
  const pt::Tractogram t = pt::read_tck(o.tractogram, geom);
  const pt::BinaryMask mask = pt::voxelize(t);
  pt::write_mask(mask, o.out);

  Manifest m("make-mask");
  m.add("tractogram", o.tractogram);
  m.add("geometry", o.geometry);
  m.add("out", o.out);
  m.add("streamlines", t.streamlines.size());
  m.add("mask_voxels", mask.count_set());
  if (!o.config.empty()) m.add("config", o.config);
  m.write(manifest_path(o.out));
}

void setup_make_mask(CLI::App& app) {
  auto o = std::make_shared<MakeMaskOpts>();
  CLI::App* sub =
      app.add_subcommand("make-mask", "Voxelize a tractogram into a binary tract mask");
  sub->add_option("--tractogram", o->tractogram, "Input TCK file")->required();
  sub->add_option("--geometry", o->geometry,
                  "NIfTI file defining the output grid (data ignored)")
      ->required();
  sub->add_option("--out", o->out, "Output mask (.nii or .nii.gz)")->required();
  sub->add_option("--config", o->config,
                  "Flat key = value option file; explicit flags override it");
  sub->callback([o] { run_make_mask(*o); });
}

// ------------------------------------------------------------ make-endings

struct MakeEndingsOpts {
  std::string tractogram;
  std::string geometry;
  std::string out_start;
  std::string out_end;
  double dbscan_eps = 0.0;
  int dbscan_min_pts = 5;
  int subset = 1000;
  int close_iters = 1;
  int dilate_iters = 1;
  std::string config;
};

void run_make_endings(const MakeEndingsOpts& o) {
  const pt::GridGeometry geom = pt::read_nifti_geometry(o.geometry);
  const pt::Tractogram t = pt::read_tck(o.tractogram, geom);
  pt::ClusterParams params;
  params.dbscan_eps_mm = o.dbscan_eps;
  params.dbscan_min_pts = o.dbscan_min_pts;
  params.subset_size = o.subset;
  const pt::EndpointRegions regions =
      pt::extract_endpoint_regions(t, params, o.close_iters, o.dilate_iters);
  pt::write_mask(regions.start, o.out_start);
  pt::write_mask(regions.end, o.out_end);

  Manifest m("make-endings");
  m.add("tractogram", o.tractogram);
  m.add("geometry", o.geometry);
  m.add("out_start", o.out_start);
  m.add("out_end", o.out_end);
  m.add("dbscan_eps_mm", params.effective_eps(geom));
  m.add("dbscan_min_pts", params.dbscan_min_pts);
  m.add("subset_size", params.subset_size);
  m.add("close_iters", o.close_iters);
  m.add("dilate_iters", o.dilate_iters);
  m.add("start_voxels", regions.start.count_set());
  m.add("end_voxels", regions.end.count_set());
  if (!o.config.empty()) m.add("config", o.config);
  m.write(manifest_path(o.out_start));
}

void setup_make_endings(CLI::App& app) {
  auto o = std::make_shared<MakeEndingsOpts>();
  CLI::App* sub = app.add_subcommand(
      "make-endings", "Extract start/end endpoint-region masks from a tractogram");
  sub->add_option("--tractogram", o->tractogram, "Input TCK file")->required();
  sub->add_option("--geometry", o->geometry,
                  "NIfTI file defining the output grid (data ignored)")
      ->required();
  sub->add_option("--out-start", o->out_start, "Output start-region mask")->required();
  sub->add_option("--out-end", o->out_end, "Output end-region mask")->required();
  sub->add_option("--dbscan-eps", o->dbscan_eps,
                  "DBSCAN radius, mm (0 = 3x mean voxel spacing)")
      ->capture_default_str();
  sub->add_option("--dbscan-min-pts", o->dbscan_min_pts, "DBSCAN core-point threshold")
      ->capture_default_str();
  sub->add_option("--subset", o->subset, "Endpoint subsample size for DBSCAN")
      ->capture_default_str();
  sub->add_option("--close-iters", o->close_iters, "Binary closing iterations")
      ->capture_default_str();
  sub->add_option("--dilate-iters", o->dilate_iters, "Binary dilation iterations")
      ->capture_default_str();
  sub->add_option("--config", o->config,
                  "Flat key = value option file; explicit flags override it");
  sub->callback([o] { run_make_endings(*o); });
}

// --------------------------------------------------------------- make-tom

struct MakeTomOpts {
  std::string tractogram;
  std::string geometry;
  std::string out;
  double bandwidth = 0.3;
  double tol = 1e-4;
  double merge_radius = 0.1;
  std::string config;
};

void run_make_tom(const MakeTomOpts& o) {
  const pt::GridGeometry geom = pt::read_nifti_geometry(o.geometry);
  const pt::Tractogram t = pt::read_tck(o.tractogram, geom);
  pt::ClusterParams params;
  params.meanshift_bandwidth = o.bandwidth;
  params.meanshift_tol = o.tol;
  params.meanshift_merge_radius = o.merge_radius;
  const pt::OrientationMap tom = pt::extract_tom(t, params);
  pt::write_tom(tom, o.out);

  Manifest m("make-tom");
  m.add("tractogram", o.tractogram);
  m.add("geometry", o.geometry);
  m.add("out", o.out);
  m.add("meanshift_bandwidth", params.meanshift_bandwidth);
  m.add("meanshift_tol", params.meanshift_tol);
  m.add("meanshift_merge_radius", params.meanshift_merge_radius);
  if (!o.config.empty()) m.add("config", o.config);
  m.write(manifest_path(o.out));
}

void setup_make_tom(CLI::App& app) {
  auto o = std::make_shared<MakeTomOpts>();
  CLI::App* sub = app.add_subcommand(
      "make-tom", "Extract a tract orientation map from a tractogram");
  sub->add_option("--tractogram", o->tractogram, "Input TCK file")->required();
  sub->add_option("--geometry", o->geometry,
                  "NIfTI file defining the output grid (data ignored)")
      ->required();
  sub->add_option("--out", o->out, "Output orientation map (.nii or .nii.gz)")
      ->required();
  sub->add_option("--bandwidth", o->bandwidth, "Mean-shift kernel bandwidth")
      ->capture_default_str();
  sub->add_option("--tol", o->tol, "Mean-shift convergence tolerance")
      ->capture_default_str();
  sub->add_option("--merge-radius", o->merge_radius, "Mean-shift mode merge radius")
      ->capture_default_str();
  sub->add_option("--config", o->config,
                  "Flat key = value option file; explicit flags override it");
  sub->callback([o] { run_make_tom(*o); });
}

// ------------------------------------------------------------------- track

struct TrackOpts {
  std::string tom_path;
  std::string mask_path;
  std::string start_path;
  std::string end_path;
  std::string out;
  std::string flavor = "direct";
  std::string peaks_path;
  double prior_weight = 0.5;
  double prune_below = 0.3;
  double step_size = 0.7;
  double gaussian_std = 0.15;
  double min_length = 50.0;
  int target = 2000;
  int max_steps = 1000;
  int max_attempt_factor = 100;
  double peak_eps = 1e-6;
  std::uint64_t seed = 0;
  std::string mode = "probabilistic";
  int threads = 1;
  std::string config;
};

void run_track(const TrackOpts& o) {
  pt::OrientationMap tom = pt::read_tom(o.tom_path);
  pt::BinaryMask mask = pt::read_mask(o.mask_path);
  pt::BinaryMask start = pt::read_mask(o.start_path);
  pt::BinaryMask end = pt::read_mask(o.end_path);
  require_same_grid(tom.geometry, o.tom_path, mask.geometry, o.mask_path);
  require_same_grid(tom.geometry, o.tom_path, start.geometry, o.start_path);
  require_same_grid(tom.geometry, o.tom_path, end.geometry, o.end_path);
  if (mask.count_set() == 0)
    throw pt::DataError("track-empty-mask",
                        "tract mask has no set voxels: " + o.mask_path);

  pt::OrientationMap substrate = std::move(tom);
  if (o.flavor != "direct") {
    const pt::PeakImage peaks = pt::read_peaks(o.peaks_path);
    require_same_grid(substrate.geometry, o.tom_path, peaks.geometry, o.peaks_path);
    if (o.flavor == "best-orig")
      substrate = pt::select_best_original_peak(peaks, substrate);
    else
      substrate = pt::fuse_prior(substrate, peaks, o.prior_weight);
  }
  substrate = pt::prune_peaks(substrate, o.prune_below);

  pt::TrackerConfig cfg;
  cfg.step_size_vox = o.step_size;
  cfg.gaussian_std = o.gaussian_std;
  cfg.min_length_mm = o.min_length;
  cfg.target_count = o.target;
  cfg.max_steps = o.max_steps;
  cfg.max_attempt_factor = o.max_attempt_factor;
  cfg.peak_eps = o.peak_eps;
  cfg.master_seed = o.seed;
  cfg.mode = o.mode == "deterministic" ? pt::TrackingMode::deterministic
                                       : pt::TrackingMode::probabilistic;
  const int threads = effective_threads(o.threads);

  const pt::TrackingContext ctx(std::move(substrate), std::move(mask),
                                std::move(start), std::move(end));
  const pt::BundleResult result = pt::track_bundle(ctx, cfg, threads);
  pt::write_tck(result.tractogram, o.out);

  if (result.attempt_budget_exhausted)
    std::cerr << "warning: attempt budget exhausted, wrote "
              << result.accepted << "/" << cfg.target_count << " streamlines\n";

  Manifest m("track");
  m.add("tom", o.tom_path);
  m.add("mask", o.mask_path);
  m.add("start", o.start_path);
  m.add("end", o.end_path);
  if (o.flavor != "direct") m.add("peaks", o.peaks_path);
  m.add("out", o.out);
  m.add("flavor", o.flavor);
  if (o.flavor == "prior") m.add("prior_weight", o.prior_weight);
  m.add("prune_below", o.prune_below);
  m.add("step_size_vox", cfg.step_size_vox);
  m.add("gaussian_std", cfg.gaussian_std);
  m.add("min_length_mm", cfg.min_length_mm);
  m.add("target_count", cfg.target_count);
  m.add("max_steps", cfg.max_steps);
  m.add("max_attempt_factor", cfg.max_attempt_factor);
  m.add("peak_eps", cfg.peak_eps);
  m.add("master_seed", cfg.master_seed);
  m.add("mode", o.mode);
  m.add("threads", threads);
  m.add("attempts", result.attempts);
  m.add("accepted", result.accepted);
  m.add("attempt_budget_exhausted", result.attempt_budget_exhausted ? "true" : "false");
  if (!o.config.empty()) m.add("config", o.config);
  m.write(manifest_path(o.out));
}

void setup_track(CLI::App& app) {
  auto o = std::make_shared<TrackOpts>();
  CLI::App* sub = app.add_subcommand(
      "track", "Track a bundle on a tract orientation map");
  sub->add_option("--tom", o->tom_path, "Tract orientation map (.nii/.nii.gz)")
      ->required();
  sub->add_option("--mask", o->mask_path, "Tract mask")->required();
  sub->add_option("--start", o->start_path, "Start-region mask")->required();
  sub->add_option("--end", o->end_path, "End-region mask")->required();
  sub->add_option("--out", o->out, "Output TCK file")->required();
  sub->add_option("--flavor", o->flavor,
                  "TOM usage: direct, best-orig (snap to closest original peak), "
                  "prior (weighted mean with closest original peak)")
      ->check(CLI::IsMember({"direct", "best-orig", "prior"}))
      ->capture_default_str();
  sub->add_option("--peaks", o->peaks_path,
                  "Original peak image (required for best-orig and prior)");
  sub->add_option("--prior-weight", o->prior_weight,
                  "TOM weight for the prior flavor, in [0,1]")
      ->capture_default_str();
  sub->add_option("--prune-below", o->prune_below,
                  "Zero peaks shorter than this before tracking")
      ->capture_default_str();
  sub->add_option("--step-size", o->step_size, "Step size, voxels")
      ->capture_default_str();
  sub->add_option("--sigma", o->gaussian_std,
                  "Gaussian sampling std on unit-vector components")
      ->capture_default_str();
  sub->add_option("--min-length", o->min_length, "Minimum streamline length, mm")
      ->capture_default_str();
  sub->add_option("--target", o->target, "Streamline count to accept")
      ->capture_default_str();
  sub->add_option("--max-steps", o->max_steps, "Step cap per direction")
      ->capture_default_str();
  sub->add_option("--max-attempt-factor", o->max_attempt_factor,
                  "Attempt budget = factor x target")
      ->capture_default_str();
  sub->add_option("--peak-eps", o->peak_eps, "Termination threshold on |peak|")
      ->capture_default_str();
  sub->add_option("--seed", o->seed, "Master RNG seed")->capture_default_str();
  sub->add_option("--mode", o->mode, "Propagation mode")
      ->check(CLI::IsMember({"probabilistic", "deterministic"}))
      ->capture_default_str();
  sub->add_option("--threads", o->threads,
                  "Worker threads (PEAKTRACK_THREADS overrides; output unaffected)")
      ->capture_default_str();
  sub->add_option("--config", o->config,
                  "Flat key = value option file; explicit flags override it");
  sub->callback([o] {
    if (o->flavor != "direct" && o->peaks_path.empty())
      throw CLI::ValidationError(
          "--peaks is required when --flavor is best-orig or prior");
    run_track(*o);
  });
}

// ------------------------------------------------------------------ filter

struct FilterOpts {
  std::string tractogram;
  std::string mask_path;
  std::string start_path;
  std::string end_path;
  std::string out;
  double min_length = 50.0;
  std::string config;
};

void run_filter(const FilterOpts& o) {
  pt::BinaryMask mask = pt::read_mask(o.mask_path);
  pt::BinaryMask start = pt::read_mask(o.start_path);
  pt::BinaryMask end = pt::read_mask(o.end_path);
  require_same_grid(mask.geometry, o.mask_path, start.geometry, o.start_path);
  require_same_grid(mask.geometry, o.mask_path, end.geometry, o.end_path);
  const pt::Tractogram t = pt::read_tck(o.tractogram, mask.geometry);
  const pt::Tractogram kept =
      pt::filter_streamlines(t, mask, start, end, o.min_length);
  pt::write_tck(kept, o.out);

  Manifest m("filter");
  m.add("tractogram", o.tractogram);
  m.add("mask", o.mask_path);
  m.add("start", o.start_path);
  m.add("end", o.end_path);
  m.add("out", o.out);
  m.add("min_length_mm", o.min_length);
  m.add("input_streamlines", t.streamlines.size());
  m.add("kept_streamlines", kept.streamlines.size());
  if (!o.config.empty()) m.add("config", o.config);
  m.write(manifest_path(o.out));
}

void setup_filter(CLI::App& app) {
  auto o = std::make_shared<FilterOpts>();
  CLI::App* sub = app.add_subcommand(
      "filter", "Keep streamlines inside the mask, connecting start and end, "
                "and at least the minimum length");
  sub->add_option("--tractogram", o->tractogram, "Input TCK file")->required();
  sub->add_option("--mask", o->mask_path, "Tract mask")->required();
  sub->add_option("--start", o->start_path, "Start-region mask")->required();
  sub->add_option("--end", o->end_path, "End-region mask")->required();
  sub->add_option("--out", o->out, "Output TCK file")->required();
  sub->add_option("--min-length", o->min_length, "Minimum streamline length, mm")
      ->capture_default_str();
  sub->add_option("--config", o->config,
                  "Flat key = value option file; explicit flags override it");
  sub->callback([o] { run_filter(*o); });
}

// -------------------------------------------------------------------- eval

struct EvalOpts {
  std::vector<std::string> pred_masks;
  std::vector<std::string> ref_masks;
  std::vector<std::string> pred_toms;
  std::vector<std::string> ref_toms;
  std::string out;
  std::string format = "text";
  std::string config;
};

std::pair<std::string, std::string> split_name_path(const std::string& spec,
                                                    const char* flag) {
  const auto pos = spec.find('=');
  if (pos == std::string::npos || pos == 0 || pos + 1 == spec.size())
    throw CLI::ValidationError(std::string(flag) + ": expected NAME=PATH, got '" +
                               spec + "'");
  return {spec.substr(0, pos), spec.substr(pos + 1)};
}

void run_eval(const EvalOpts& o) {
  std::map<std::string, pt::BinaryMask> pred_masks, ref_masks;
  std::map<std::string, pt::OrientationMap> pred_toms, ref_toms;
  for (const auto& s : o.pred_masks) {
    auto [name, path] = split_name_path(s, "--pred-mask");
    pred_masks.emplace(name, pt::read_mask(path));
  }
  for (const auto& s : o.ref_masks) {
    auto [name, path] = split_name_path(s, "--ref-mask");
    ref_masks.emplace(name, pt::read_mask(path));
  }
  for (const auto& s : o.pred_toms) {
    auto [name, path] = split_name_path(s, "--pred-tom");
    pred_toms.emplace(name, pt::read_tom(path));
  }
  for (const auto& s : o.ref_toms) {
    auto [name, path] = split_name_path(s, "--ref-tom");
    ref_toms.emplace(name, pt::read_tom(path));
  }

  const pt::EvalReport report = pt::evaluate(pred_masks, ref_masks, pred_toms, ref_toms);
  const std::string text =
      o.format == "kv" ? report.to_key_value() : report.to_text();
  if (o.out.empty()) {
    std::cout << text;
  } else {
    write_text_atomic(o.out, text);
    Manifest m("eval");
    for (const auto& s : o.pred_masks) m.add("pred_mask", s);
    for (const auto& s : o.ref_masks) m.add("ref_mask", s);
    for (const auto& s : o.pred_toms) m.add("pred_tom", s);
    for (const auto& s : o.ref_toms) m.add("ref_tom", s);
    m.add("out", o.out);
    m.add("format", o.format);
    m.add("bundles", report.per_bundle.size());
    if (!o.config.empty()) m.add("config", o.config);
    m.write(manifest_path(o.out));
  }
}

void setup_eval(CLI::App& app) {
  auto o = std::make_shared<EvalOpts>();
  CLI::App* sub = app.add_subcommand(
      "eval", "Dice and angular-error report for predictions against references");
  sub->add_option("--pred-mask", o->pred_masks, "Predicted mask as NAME=PATH")
      ->required()
      ->take_all();
  sub->add_option("--ref-mask", o->ref_masks, "Reference mask as NAME=PATH")
      ->required()
      ->take_all();
  sub->add_option("--pred-tom", o->pred_toms, "Predicted orientation map as NAME=PATH")
      ->take_all();
  sub->add_option("--ref-tom", o->ref_toms, "Reference orientation map as NAME=PATH")
      ->take_all();
  sub->add_option("--out", o->out, "Report file (default: stdout)");
  sub->add_option("--format", o->format, "Report format")
      ->check(CLI::IsMember({"text", "kv"}))
      ->capture_default_str();
  sub->add_option("--config", o->config,
                  "Flat key = value option file; explicit flags override it");
  sub->callback([o] { run_eval(*o); });
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bundle-specific streamline tractography on tract orientation maps"};
  app.name(argc > 0 ? fs::path(argv[0]).filename().string() : "peaktrack");
  app.require_subcommand(1);
  setup_phantom(app);
  setup_make_mask(app);
  setup_make_endings(app);
  setup_make_tom(app);
  setup_track(app);
  setup_filter(app);
  setup_eval(app);
  take_last_everywhere(app);

  std::vector<std::string> tokens(argv + std::min(argc, 1), argv + argc);
  try {
    splice_config_tokens(app, tokens);
    std::reverse(tokens.begin(), tokens.end());
    app.parse(tokens);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const pt::DataError& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
