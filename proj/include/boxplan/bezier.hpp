#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "boxplan/geometry.hpp"

namespace boxplan {

/// Exact binomial coefficient from a cached integer Pascal triangle.
/// Supported up to n = 40, far beyond the curve degrees used here.
std::uint64_t binomial(int n, int k);

/// Bernstein basis polynomial of the given degree over [a, b],
///   C(M, n) ((t - a)/(b - a))^n ((b - t)/(b - a))^(M - n).
double bernstein(int degree, int n, double a, double b, double t);

/// Polynomial curve in Bernstein form over a time interval [a, b]. The curve
/// starts at its first control point, ends at its last, and stays inside the
/// convex hull of all control points. Immutable.
class BezierCurve {
 public:
  /// Control points are the columns of a d x (M + 1) matrix.
  BezierCurve(double a, double b, Eigen::MatrixXd control_points);

  double start_time() const { return a_; }
  double end_time() const { return b_; }
  int degree() const { return static_cast<int>(points_.cols()) - 1; }
  int dim() const { return static_cast<int>(points_.rows()); }
  const Eigen::MatrixXd& control_points() const { return points_; }

  Vec start_point() const { return points_.col(0); }
  Vec end_point() const { return points_.col(points_.cols() - 1); }

  /// Evaluate at t in [a, b]; throws std::domain_error outside.
  Vec eval(double t) const;

  /// The derivative curve, one degree lower, on the same interval.
  BezierCurve derivative() const;

  /// Integral of ||curve(t)||^2 over [a, b], exact in the control points.
  double squared_l2() const;

 private:
  double a_, b_;
  Eigen::MatrixXd points_;
};

/// Exact quadratic form for the squared L2 norm of a Bernstein-form curve on
/// a unit interval: entry (m, n) is C(M,m) C(M,n) / ((2M+1) C(2M, m+n)).
class QForm {
 public:
  explicit QForm(int degree);

  int degree() const { return degree_; }
  const Eigen::MatrixXd& matrix() const { return coeff_; }

  /// Value of the form on control points given as columns of a matrix.
  double operator()(const Eigen::MatrixXd& control_points) const;

 private:
  int degree_;
  Eigen::MatrixXd coeff_;
};

}  // namespace boxplan
