#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "boxplan/conic.hpp"

using namespace boxplan;
using conic::ConicProblem;
using conic::ConicSolution;
using conic::SolveOptions;
using conic::SolveStatus;

TEST_CASE("minimum-norm point pinned by equalities") {
  // min ||x||_2 s.t. x = c  ->  objective ||c||_2.
  ConicProblem prob;
  const int t = prob.add_var();
  const int x = prob.add_vars(3);
  prob.add_linear(t, 1.0);
  prob.add_soc({t, x, x + 1, x + 2});
  prob.fix_var(x, 3.0);
  prob.fix_var(x + 1, 0.0);
  prob.fix_var(x + 2, -4.0);
  auto sol = conic::solve(prob, {.tol = 1e-9});
  REQUIRE(sol.ok());
  CHECK(sol.objective == doctest::Approx(5.0).epsilon(1e-7));
  CHECK(sol.x[x] == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(sol.x[x + 2] == doctest::Approx(-4.0).epsilon(1e-8));
}

TEST_CASE("active bound quadratic") {
  // min x^2 s.t. 1 <= x <= 2  ->  x = 1, objective 1.
  ConicProblem prob;
  const int x = prob.add_var(1.0, 2.0);
  prob.add_quad(x, x, 1.0);
  auto sol = conic::solve(prob, {.tol = 1e-9});
  REQUIRE(sol.ok());
  CHECK(sol.x[x] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-7));
  // The lower bound is active and carries the full reduced cost.
  CHECK(sol.lower_dual[x] == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(sol.upper_dual[x] <= 1e-6);
}

TEST_CASE("pure equality QP") {
  // min (x-1)^2 + (y-2)^2 s.t. x + y = 1; optimum at (0, 1).
  ConicProblem prob;
  const int x = prob.add_var();
  const int y = prob.add_var();
  prob.add_quad(x, x, 1.0);
  prob.add_linear(x, -2.0);
  prob.add_quad(y, y, 1.0);
  prob.add_linear(y, -4.0);
  prob.add_eq({{x, 1.0}, {y, 1.0}}, 1.0);
  auto sol = conic::solve(prob);
  REQUIRE(sol.ok());
  CHECK(sol.x[x] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(sol.x[y] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("banded QP matches dense KKT oracle") {
  // Random 50-stage equality-constrained QP with chain coupling, solved
  // against a dense factorization of the full KKT system.
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int stages = 50;
  const int per = 4;
  ConicProblem prob;
  const int base = prob.add_vars(stages * per);
  prob.stage_count = stages;
  prob.stage_span = per;
  for (int s = 0; s < stages; ++s) {
    Eigen::MatrixXd R(per, per);
    for (int i = 0; i < per * per; ++i) R.data()[i] = gauss(rng);
    Eigen::MatrixXd H = R.transpose() * R + 0.1 * Eigen::MatrixXd::Identity(per, per);
    for (int i = 0; i < per; ++i) {
      for (int j = i; j < per; ++j) {
        const double w = (i == j) ? 0.5 * H(i, i) : H(i, j);
        prob.add_quad(base + s * per + i, base + s * per + j, w);
      }
      prob.add_linear(base + s * per + i, gauss(rng));
    }
    if (s + 1 < stages) {
      // One coupling row per stage pair.
      std::vector<std::pair<int, double>> terms;
      for (int i = 0; i < per; ++i) {
        terms.emplace_back(base + s * per + i, gauss(rng));
        terms.emplace_back(base + (s + 1) * per + i, gauss(rng));
      }
      prob.add_eq(terms, gauss(rng));
    }
  }
  auto sol = conic::solve(prob, {.tol = 1e-9});
  REQUIRE(sol.ok());

  const int n = prob.num_vars;
  const int p = prob.num_eq_rows();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (const auto& t : prob.quad) {
    if (t.row() == t.col()) {
      P(t.row(), t.col()) += 2.0 * t.value();
    } else {
      P(t.row(), t.col()) += t.value();
      P(t.col(), t.row()) += t.value();
    }
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, n);
  for (const auto& t : prob.eq) A(t.row(), t.col()) += t.value();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + p, n + p);
  K.topLeftCorner(n, n) = P;
  K.topRightCorner(n, p) = A.transpose();
  K.bottomLeftCorner(p, n) = A;
  Eigen::VectorXd rhs(n + p);
  for (int i = 0; i < n; ++i) rhs[i] = -prob.linear[i];
  for (int r = 0; r < p; ++r) rhs[n + r] = prob.eq_rhs[r];
  Eigen::VectorXd ref = K.fullPivLu().solve(rhs);

  const double scale = std::max(1.0, ref.head(n).lpNorm<Eigen::Infinity>());
  CHECK((sol.x - ref.head(n)).lpNorm<Eigen::Infinity>() / scale <= 1e-6);
}

TEST_CASE("complementary slackness of returned duals") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    // min sum ||x_i - g_i||^2 with box bounds; some bounds end up active.
    ConicProblem prob;
    const int n = 6;
    const int x = prob.add_vars(n, -0.3, 0.3);
    for (int i = 0; i < n; ++i) {
      prob.add_quad(x + i, x + i, 1.0);
      prob.add_linear(x + i, -2.0 * uni(rng));
    }
    auto sol = conic::solve(prob, {.tol = 1e-9});
    REQUIRE(sol.ok());
    for (int i = 0; i < n; ++i) {
      const double sl = sol.x[x + i] + 0.3;
      const double su = 0.3 - sol.x[x + i];
      CHECK(std::abs(sol.lower_dual[x + i] * sl) <= 1e-6);
      CHECK(std::abs(sol.upper_dual[x + i] * su) <= 1e-6);
      CHECK(sol.lower_dual[x + i] >= -1e-9);
      CHECK(sol.upper_dual[x + i] >= -1e-9);
    }
  }
}

TEST_CASE("epigraph SOC with bounds") {
  // min t s.t. t >= ||x - a||, 0.5 <= x_0 (pushes away from a).
  ConicProblem prob;
  const int t = prob.add_var();
  const int x = prob.add_var(0.5, conic::kInf);
  prob.add_var();  // x1 free
  const int r = prob.add_vars(2);
  prob.add_linear(t, 1.0);
  prob.add_eq({{r, 1.0}, {x, -1.0}}, -0.2);        // r0 = x0 - 0.2
  prob.add_eq({{r + 1, 1.0}, {x + 1, -1.0}}, 0.0);  // r1 = x1
  prob.add_soc({t, r, r + 1});
  auto sol = conic::solve(prob, {.tol = 1e-9});
  REQUIRE(sol.ok());
  CHECK(sol.x[t] == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(sol.x[x] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::abs(sol.x[x + 1]) <= 1e-6);
}

TEST_CASE("invalid problems are rejected") {
  ConicProblem bad;
  bad.add_var(1.0, 0.0);  // lb > ub
  CHECK_THROWS_AS(conic::solve(bad), std::invalid_argument);

  ConicProblem empty_block;
  empty_block.add_var();
  empty_block.add_soc({});
  CHECK_THROWS_AS(conic::solve(empty_block), std::invalid_argument);
}
