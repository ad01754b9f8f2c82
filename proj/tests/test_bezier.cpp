#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "boxplan/bezier.hpp"

using namespace boxplan;

namespace {

// De Casteljau evaluation, the independent oracle for eval().
Vec de_casteljau(const Eigen::MatrixXd& pts, double a, double b, double t) {
  Eigen::MatrixXd work = pts;
  const double s = (t - a) / (b - a);
  for (int level = static_cast<int>(pts.cols()) - 1; level > 0; --level) {
    for (int i = 0; i < level; ++i) {
      work.col(i) = (1.0 - s) * work.col(i) + s * work.col(i + 1);
    }
  }
  return work.col(0);
}

// 64-point Gauss-Legendre quadrature of ||curve||^2, oracle for squared_l2().
double quadrature_l2(const BezierCurve& curve) {
  static std::vector<std::pair<double, double>> nodes = [] {
    // Golub-Welsch via the symmetric tridiagonal Jacobi matrix.
    const int n = 64;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
      const double bcoef = i / std::sqrt(4.0 * i * i - 1.0);
      J(i, i - 1) = bcoef;
      J(i - 1, i) = bcoef;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    std::vector<std::pair<double, double>> out(n);
    for (int i = 0; i < n; ++i) {
      out[i] = {es.eigenvalues()[i], 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i)};
    }
    return out;
  }();
  const double a = curve.start_time(), b = curve.end_time();
  double acc = 0.0;
  for (auto [xi, wi] : nodes) {
    const double t = 0.5 * (b - a) * xi + 0.5 * (a + b);
    acc += wi * curve.eval(t).squaredNorm();
  }
  return 0.5 * (b - a) * acc;
}

BezierCurve random_curve(std::mt19937_64& rng, int max_degree = 9, int max_dim = 3) {
  std::uniform_int_distribution<int> deg(0, max_degree);
  std::uniform_int_distribution<int> dim(1, max_dim);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::uniform_real_distribution<double> len(0.5, 2.0);
  const int m = deg(rng);
  const int d = dim(rng);
  Eigen::MatrixXd pts(d, m + 1);
  for (int i = 0; i < pts.size(); ++i) pts.data()[i] = coord(rng);
  const double a = coord(rng);
  return BezierCurve(a, a + len(rng), pts);
}

}  // namespace

TEST_CASE("bernstein basis values") {
  CHECK(bernstein(3, 0, 0.0, 1.0, 0.0) == 1.0);
  CHECK(bernstein(3, 1, 0.0, 1.0, 0.0) == 0.0);
  CHECK(bernstein(2, 1, 0.0, 1.0, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(bernstein(2, 0, 1.0, 1.0, 1.0), std::invalid_argument);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(-2.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double t = uni(rng);
    double sum = 0.0;
    for (int n = 0; n <= 5; ++n) sum += bernstein(5, n, -2.0, 5.0, t);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("curve endpoints are the first and last control points, exactly") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = random_curve(rng);
    CHECK(c.eval(c.start_time()) == c.control_points().col(0));
    CHECK(c.eval(c.end_time()) == c.control_points().col(c.degree()));
  }
}

TEST_CASE("constant curves evaluate to the constant") {
  Eigen::MatrixXd pts(2, 4);
  pts << 1, 1, 1, 1, -2, -2, -2, -2;
  BezierCurve c(0.0, 3.0, pts);
  for (double t : {0.0, 0.7, 1.5, 3.0}) {
    CHECK(c.eval(t)[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.eval(t)[1] == doctest::Approx(-2.0).epsilon(1e-15));
  }
}

TEST_CASE("eval matches de Casteljau") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = random_curve(rng);
    const double t = c.start_time() + uni(rng) * (c.end_time() - c.start_time());
    Vec ref = de_casteljau(c.control_points(), c.start_time(), c.end_time(), t);
    CHECK((c.eval(t) - ref).norm() <= 1e-12);
  }
}

TEST_CASE("eval rejects out-of-domain times") {
  Eigen::MatrixXd pts(1, 2);
  pts << 0, 1;
  BezierCurve c(0.0, 1.0, pts);
  CHECK_THROWS_AS(c.eval(-0.01), std::domain_error);
  CHECK_THROWS_AS(c.eval(1.01), std::domain_error);
}

TEST_CASE("derivative control points and slopes") {
  Eigen::MatrixXd pts(1, 2);
  pts << 0, 4;
  BezierCurve line(0.0, 2.0, pts);
  auto d = line.derivative();
  CHECK(d.degree() == 0);
  CHECK(d.control_points()(0, 0) == doctest::Approx(2.0).epsilon(1e-15));

  Eigen::MatrixXd cpts = Eigen::MatrixXd::Constant(3, 5, 1.25);
  auto dz = BezierCurve(0.0, 1.0, cpts).derivative();
  CHECK(dz.control_points().cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd p0(1, 1);
  p0 << 1;
  CHECK_THROWS_AS(BezierCurve(0.0, 1.0, p0).derivative(), std::invalid_argument);
}

TEST_CASE("derivative matches finite differences") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = random_curve(rng);
    if (c.degree() < 1) continue;
    auto d = c.derivative();
    const double span = c.end_time() - c.start_time();
    const double h = 1e-5 * span;
    for (int i = 1; i <= 50; ++i) {
      const double t = c.start_time() + span * i / 51.0;
      Vec fd = (c.eval(t + h) - c.eval(t - h)) / (2.0 * h);
      CHECK((d.eval(t) - fd).lpNorm<Eigen::Infinity>() <= 1e-6);
    }
  }
}

TEST_CASE("squared L2 norm closed form") {
  // Constant curve: (b - a) ||c||^2.
  Eigen::MatrixXd pts(2, 1);
  pts << 3, 4;
  CHECK(BezierCurve(1.0, 3.5, pts).squared_l2() == doctest::Approx(2.5 * 25.0).epsilon(1e-14));

  // Linear ramp t on [0, 1]: integral of t^2 is 1/3.
  Eigen::MatrixXd ramp(1, 2);
  ramp << 0, 1;
  CHECK(BezierCurve(0.0, 1.0, ramp).squared_l2() == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("squared L2 matches quadrature") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    auto c = random_curve(rng, 7);
    const double exact = c.squared_l2();
    const double quad = quadrature_l2(c);
    CHECK(std::abs(exact - quad) <= 1e-10 * std::max(1.0, std::abs(quad)));
  }
}

TEST_CASE("convex hull containment against control-point bounding box") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = random_curve(rng);
    Vec lo = c.control_points().rowwise().minCoeff();
    Vec hi = c.control_points().rowwise().maxCoeff();
    for (int i = 0; i <= 1000; ++i) {
      const double t =
          c.start_time() + (c.end_time() - c.start_time()) * i / 1000.0;
      Vec x = c.eval(t);
      for (int r = 0; r < x.size(); ++r) {
        CHECK(x[r] >= lo[r] - 1e-12);
        CHECK(x[r] <= hi[r] + 1e-12);
      }
    }
  }
}

TEST_CASE("QForm is symmetric PSD with row sums 1/(M+1)") {
  for (int m = 0; m <= 9; ++m) {
    QForm q(m);
    const Eigen::MatrixXd& W = q.matrix();
    CHECK((W - W.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    for (int r = 0; r <= m; ++r) {
      CHECK(W.row(r).sum() * (m + 1) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("exact binomials") {
  CHECK(binomial(0, 0) == 1);
  CHECK(binomial(18, 9) == 48620);
  CHECK(binomial(10, 3) == 120);
  CHECK_THROWS_AS(binomial(5, 6), std::domain_error);
}
