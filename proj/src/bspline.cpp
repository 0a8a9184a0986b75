#include "peaktrack/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pt {

namespace {

// Knot span index i with knots[i] <= u < knots[i+1]; the end of the domain
// falls into the last valid span.
int find_span(double u, const std::vector<double>& knots, int n_controls) {
  if (u >= knots[n_controls])
    return n_controls - 1;
  if (u <= knots[3])
    return 3;
  int lo = 3, hi = n_controls, mid = (lo + hi) / 2;
  while (u < knots[mid] || u >= knots[mid + 1]) {
    if (u < knots[mid])
      hi = mid;
    else
      lo = mid;
    mid = (lo + hi) / 2;
  }
  return mid;
}

// Cox-de Boor recursion for the four nonzero cubic basis values at u.
void basis_funs(int span, double u, const std::vector<double>& knots, double out[4]) {
  double left[4], right[4];
  out[0] = 1.0;
  for (int j = 1; j <= 3; ++j) {
    left[j] = u - knots[span + 1 - j];
    right[j] = knots[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

// Clamped knot vector from parameter averaging over an m-point subsample
// of the data parameters. Keeps the collocation matrix nonsingular
// (Schoenberg-Whitney) for every m up to the point count.
std::vector<double> make_knots(const std::vector<double>& params, int m) {
  const int n = static_cast<int>(params.size());
  std::vector<double> sub(m);
  for (int r = 0; r < m; ++r) {
    const int idx = static_cast<int>(
        std::llround(static_cast<double>(r) * (n - 1) / (m - 1)));
    sub[r] = params[idx];
  }
  std::vector<double> knots(m + 4);
  for (int c = 0; c < 4; ++c) {
    knots[c] = sub.front();
    knots[m + c] = sub.back();
  }
  for (int j = 1; j <= m - 4; ++j)
    knots[j + 3] = (sub[j] + sub[j + 1] + sub[j + 2]) / 3.0;
  return knots;
}

struct Attempt {
  BSplineCurve curve;
  double residual;
};

Attempt fit_with_controls(const Eigen::Matrix<double, Eigen::Dynamic, 3>& pts,
                          const std::vector<double>& params, int m) {
  const int n = static_cast<int>(params.size());
  std::vector<double> knots = make_knots(params, m);

  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(n, m);
  for (int i = 0; i < n; ++i) {
    const int span = find_span(params[i], knots, m);
    double b[4];
    basis_funs(span, params[i], knots, b);
    for (int r = 0; r < 4; ++r)
      basis(i, span - 3 + r) = b[r];
  }

  // Pin the end control points to the data endpoints, solve for the rest.
  const Eigen::RowVector3d c_first = pts.row(0);
  const Eigen::RowVector3d c_last = pts.row(n - 1);
  Eigen::MatrixXd rhs = pts;
  rhs -= basis.col(0) * c_first;
  rhs -= basis.col(m - 1) * c_last;

  const Eigen::MatrixXd inner = basis.middleCols(1, m - 2);
  const Eigen::MatrixXd sol = inner.colPivHouseholderQr().solve(rhs);

  Eigen::Matrix<double, Eigen::Dynamic, 3> controls(m, 3);
  controls.row(0) = c_first;
  controls.row(m - 1) = c_last;
  controls.middleRows(1, m - 2) = sol;

  const double residual = (basis * controls - pts).squaredNorm();
  return {BSplineCurve(std::move(knots), std::move(controls)), residual};
}

} // namespace

Eigen::Vector3d BSplineCurve::evaluate(double u) const {
  const int m = control_count();
  const double lo = knots_[3], hi = knots_[m];
  u = std::clamp(u, lo, hi);
  const int span = find_span(u, knots_, m);
  double b[4];
  basis_funs(span, u, knots_, b);
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (int r = 0; r < 4; ++r)
    p += b[r] * controls_.row(span - 3 + r).transpose();
  return p;
}

BSplineFit fit_bspline(const std::vector<Eigen::Vector3d>& points,
                       const std::vector<double>& params, double max_residual) {
  const int n = static_cast<int>(points.size());
  if (n < 4)
    throw std::invalid_argument("fit_bspline: need at least 4 points");
  if (static_cast<int>(params.size()) != n)
    throw std::invalid_argument("fit_bspline: params/points size mismatch");

  Eigen::Matrix<double, Eigen::Dynamic, 3> pts(n, 3);
  for (int i = 0; i < n; ++i)
    pts.row(i) = points[i];

  const double budget = std::max(max_residual, 1e-12);
  int m = 4;
  Attempt best = fit_with_controls(pts, params, m);
  while (best.residual > budget && m < n) {
    m = std::min(n, 2 * m);
    best = fit_with_controls(pts, params, m);
  }
  return {std::move(best.curve), best.residual};
}

} // namespace pt
