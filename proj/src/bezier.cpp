#include "boxplan/bezier.hpp"

#include <stdexcept>
#include <vector>

namespace boxplan {

namespace {

constexpr int kMaxBinomialRow = 40;

const std::vector<std::vector<std::uint64_t>>& pascal_triangle() {
  static const std::vector<std::vector<std::uint64_t>> table = [] {
    std::vector<std::vector<std::uint64_t>> rows(kMaxBinomialRow + 1);
    for (int n = 0; n <= kMaxBinomialRow; ++n) {
      rows[n].resize(n + 1);
      rows[n][0] = rows[n][n] = 1;
      for (int k = 1; k < n; ++k) {
        rows[n][k] = rows[n - 1][k - 1] + rows[n - 1][k];
      }
    }
    return rows;
  }();
  return table;
}

}  // namespace

std::uint64_t binomial(int n, int k) {
  if (n < 0 || k < 0 || k > n) {
    throw std::domain_error("binomial: require 0 <= k <= n");
  }
  if (n > kMaxBinomialRow) {
    throw std::domain_error("binomial: exact table covers n <= 40");
  }
  return pascal_triangle()[n][k];
}

double bernstein(int degree, int n, double a, double b, double t) {
  if (!(b > a)) {
    throw std::invalid_argument("bernstein: interval must satisfy b > a");
  }
  if (n < 0 || n > degree) {
    throw std::domain_error("bernstein: basis index out of range");
  }
  const double s = (t - a) / (b - a);
  const double r = (b - t) / (b - a);
  double sp = 1.0;
  for (int i = 0; i < n; ++i) sp *= s;
  double rp = 1.0;
  for (int i = 0; i < degree - n; ++i) rp *= r;
  return static_cast<double>(binomial(degree, n)) * sp * rp;
}

BezierCurve::BezierCurve(double a, double b, Eigen::MatrixXd control_points)
    : a_(a), b_(b), points_(std::move(control_points)) {
  if (!(b_ > a_)) {
    throw std::invalid_argument("BezierCurve: interval must satisfy b > a");
  }
  if (points_.rows() < 1 || points_.cols() < 1) {
    throw std::invalid_argument("BezierCurve: need at least one control point");
  }
}

Vec BezierCurve::eval(double t) const {
  if (t < a_ || t > b_) {
    throw std::domain_error("BezierCurve::eval: t outside [a, b]");
  }
  const int m = degree();
  const double s = (t - a_) / (b_ - a_);
  const double r = (b_ - t) / (b_ - a_);
  // Running powers keep the endpoint evaluations exact: at t = a only the
  // n = 0 term survives with coefficient one, and symmetrically at t = b.
  std::vector<double> spow(m + 1), rpow(m + 1);
  spow[0] = 1.0;
  for (int n = 1; n <= m; ++n) spow[n] = spow[n - 1] * s;
  rpow[m] = 1.0;
  for (int n = m - 1; n >= 0; --n) rpow[n] = rpow[n + 1] * r;
  Vec out = Vec::Zero(dim());
  for (int n = 0; n <= m; ++n) {
    const double beta = static_cast<double>(binomial(m, n)) * spow[n] * rpow[n];
    out += beta * points_.col(n);
  }
  return out;
}

BezierCurve BezierCurve::derivative() const {
  const int m = degree();
  if (m < 1) {
    throw std::invalid_argument("BezierCurve::derivative: degree zero curve");
  }
  Eigen::MatrixXd pts(dim(), m);
  const double scale = static_cast<double>(m) / (b_ - a_);
  for (int n = 0; n < m; ++n) {
    pts.col(n) = scale * (points_.col(n + 1) - points_.col(n));
  }
  return BezierCurve(a_, b_, std::move(pts));
}

double BezierCurve::squared_l2() const {
  return (b_ - a_) * QForm(degree())(points_);
}

QForm::QForm(int degree) : degree_(degree) {
  if (degree < 0) {
    throw std::invalid_argument("QForm: negative degree");
  }
  const int m = degree;
  coeff_.resize(m + 1, m + 1);
  const double denom = static_cast<double>(2 * m + 1);
  for (int i = 0; i <= m; ++i) {
    for (int j = 0; j <= m; ++j) {
      const double num = static_cast<double>(binomial(m, i)) * static_cast<double>(binomial(m, j));
      coeff_(i, j) = num / (denom * static_cast<double>(binomial(2 * m, i + j)));
    }
  }
}

double QForm::operator()(const Eigen::MatrixXd& control_points) const {
  if (control_points.cols() != degree_ + 1) {
    throw std::invalid_argument("QForm: control point count does not match degree");
  }
  const Eigen::MatrixXd gram = control_points.transpose() * control_points;
  return gram.cwiseProduct(coeff_).sum();
}

}  // namespace boxplan
