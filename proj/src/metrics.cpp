#include "peaktrack/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "peaktrack/errors.hpp"

namespace pt {

double dice(const BinaryMask& a, const BinaryMask& b) {
  if (!a.geometry.compatible(b.geometry))
    throw DataError("metrics-geometry-mismatch", "dice: masks live on different grids");
  std::size_t na = 0, nb = 0, inter = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool va = a.data[i] != 0, vb = b.data[i] != 0;
    na += va;
    nb += vb;
    inter += (va && vb);
  }
  if (na + nb == 0)
    return 1.0; // absent tract predicted absent
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

AngularErrorResult mean_angular_error(const OrientationMap& a, const OrientationMap& b) {
  if (!a.geometry.compatible(b.geometry))
    throw DataError("metrics-geometry-mismatch",
                    "mean_angular_error: maps live on different grids");
  double sum_deg = 0.0;
  std::size_t count = 0;
  const std::size_t n = a.geometry.voxel_count();
  for (std::size_t v = 0; v < n; ++v) {
    const Vector3 pa = a.peak(v);
    const Vector3 pb = b.peak(v);
    const double na = pa.norm(), nb = pb.norm();
    if (na <= 0.0 || nb <= 0.0)
      continue;
    double c = std::abs(pa.dot(pb)) / (na * nb);
    c = std::min(c, 1.0);
    sum_deg += std::acos(c) * 180.0 / M_PI;
    ++count;
  }
  if (count == 0)
    throw DataError("metrics-no-comparable-voxels",
                    "no voxel has a nonzero peak in both maps");
  return {sum_deg / static_cast<double>(count), count};
}

double bce_loss(const LossSample& s) {
  if (s.y.size() != s.y_hat.size())
    throw DataError("metrics-shape-mismatch", "bce_loss: y and y_hat differ in size");
  if (s.y.empty())
    throw DataError("metrics-shape-mismatch", "bce_loss: empty sample");
  constexpr double eps = 1e-7;
  double sum = 0.0;
  for (std::size_t i = 0; i < s.y.size(); ++i) {
    const double yh = std::min(std::max(s.y_hat[i], eps), 1.0 - eps);
    sum += s.y[i] * std::log(yh) + (1.0 - s.y[i]) * std::log(1.0 - yh);
  }
  return -sum / static_cast<double>(s.y.size());
}

double cosine_loss(const LossSample& s) {
  if (s.y.size() != s.y_hat.size())
    throw DataError("metrics-shape-mismatch", "cosine_loss: y and y_hat differ in size");
  if (s.y.empty() || s.y.size() % 3 != 0)
    throw DataError("metrics-shape-mismatch",
                    "cosine_loss: arrays must hold interleaved 3-vectors");
  const std::size_t n = s.y.size() / 3;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vector3 y(s.y[3 * i], s.y[3 * i + 1], s.y[3 * i + 2]);
    const Vector3 yh(s.y_hat[3 * i], s.y_hat[3 * i + 1], s.y_hat[3 * i + 2]);
    const double ny = y.norm(), nyh = yh.norm();
    if (ny <= 0.0 || nyh <= 0.0)
      throw DataError("metrics-zero-vector", "cosine_loss: zero-norm vector");
    sum += std::abs(yh.dot(y)) / (nyh * ny);
  }
  return -sum / static_cast<double>(n);
}

namespace {

template <typename Map>
void require_matching_names(const Map& a, const Map& b, const char* what) {
  bool match = a.size() == b.size();
  if (match) {
    auto ia = a.begin();
    auto ib = b.begin();
    for (; ia != a.end(); ++ia, ++ib)
      if (ia->first != ib->first) {
        match = false;
        break;
      }
  }
  if (!match)
    throw DataError("metrics-name-set-mismatch",
                    std::string(what) + ": bundle-name sets differ");
}

} // namespace

EvalReport evaluate(const std::map<std::string, BinaryMask>& pred_masks,
                    const std::map<std::string, BinaryMask>& ref_masks,
                    const std::map<std::string, OrientationMap>& pred_toms,
                    const std::map<std::string, OrientationMap>& ref_toms) {
  require_matching_names(pred_masks, ref_masks, "masks");
  require_matching_names(pred_toms, ref_toms, "orientation maps");
  if (!pred_toms.empty()) {
    if (pred_toms.size() != pred_masks.size())
      throw DataError("metrics-name-set-mismatch",
                      "orientation maps must cover the same bundles as the masks");
    for (const auto& [name, tom] : pred_toms)
      if (pred_masks.find(name) == pred_masks.end())
        throw DataError("metrics-name-set-mismatch",
                        "orientation map bundle '" + name + "' has no mask");
  }
  if (pred_masks.empty())
    throw DataError("metrics-name-set-mismatch", "no bundles to evaluate");

  EvalReport report;
  double dice_sum = 0.0, ang_sum = 0.0;
  std::size_t ang_bundles = 0;
  for (const auto& [name, pred] : pred_masks) {
    BundleScore score{};
    score.dice = dice(pred, ref_masks.at(name));
    score.mean_angular_error_deg = std::numeric_limits<double>::quiet_NaN();
    score.voxels_compared = 0;
    const auto pt_it = pred_toms.find(name);
    if (pt_it != pred_toms.end()) {
      const auto res = mean_angular_error(pt_it->second, ref_toms.at(name));
      score.mean_angular_error_deg = res.mean_deg;
      score.voxels_compared = res.voxels_compared;
      ang_sum += res.mean_deg;
      ++ang_bundles;
    }
    dice_sum += score.dice;
    report.per_bundle.emplace(name, score);
  }
  report.mean_dice = dice_sum / static_cast<double>(pred_masks.size());
  report.mean_angular_error_deg =
      ang_bundles > 0 ? ang_sum / static_cast<double>(ang_bundles)
                      : std::numeric_limits<double>::quiet_NaN();
  return report;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

} // namespace

std::string EvalReport::to_text() const {
  std::ostringstream os;
  for (const auto& [name, s] : per_bundle) {
    os << name << ": dice " << fmt(s.dice);
    if (!std::isnan(s.mean_angular_error_deg))
      os << ", angular error " << fmt(s.mean_angular_error_deg) << " deg over "
         << s.voxels_compared << " voxels";
    os << "\n";
  }
  os << "mean: dice " << fmt(mean_dice);
  if (!std::isnan(mean_angular_error_deg))
    os << ", angular error " << fmt(mean_angular_error_deg) << " deg";
  os << "\n";
  return os.str();
}

std::string EvalReport::to_key_value() const {
  std::ostringstream os;
  for (const auto& [name, s] : per_bundle) {
    os << "bundle = " << name << "\n";
    os << "dice = " << fmt(s.dice) << "\n";
    if (!std::isnan(s.mean_angular_error_deg)) {
      os << "mean_angular_error_deg = " << fmt(s.mean_angular_error_deg) << "\n";
      os << "voxels_compared = " << s.voxels_compared << "\n";
    }
  }
  os << "mean_dice = " << fmt(mean_dice) << "\n";
  if (!std::isnan(mean_angular_error_deg))
    os << "mean_angular_error_deg_overall = " << fmt(mean_angular_error_deg) << "\n";
  return os.str();
}

} // namespace pt
