#ifndef PEAKTRACK_BSPLINE_HPP
#define PEAKTRACK_BSPLINE_HPP

#include <vector>

#include <Eigen/Dense>

namespace pt {

// Clamped cubic B-spline curve in 3-D, produced by a least-squares fit.
class BSplineCurve {
public:
  BSplineCurve() = default;
  BSplineCurve(std::vector<double> knots,
               Eigen::Matrix<double, Eigen::Dynamic, 3> controls)
      : knots_(std::move(knots)), controls_(std::move(controls)) {}

  // Evaluate at a parameter within the knot domain (clamped outside).
  Eigen::Vector3d evaluate(double u) const;

  const std::vector<double>& knots() const { return knots_; }
  int control_count() const { return static_cast<int>(controls_.rows()); }

private:
  std::vector<double> knots_;            // m + 4 entries
  Eigen::Matrix<double, Eigen::Dynamic, 3> controls_; // m x 3
};

struct BSplineFit {
  BSplineCurve curve;
  double residual; // sum of squared fit distances (mm^2)
};

// Least-squares clamped cubic fit of a polyline at chord-length parameters,
// with the first and last control point pinned to the data endpoints.
// The control count grows from 4 until the residual drops below
// `max_residual` (an exact interpolant once it reaches the point count).
BSplineFit fit_bspline(const std::vector<Eigen::Vector3d>& points,
                       const std::vector<double>& params, double max_residual);

} // namespace pt

#endif
