#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace boxplan::conic {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Convex conic program in the form
///
///   minimize   (1/2) x'Px + c'x
///   subject to A x = b
///              lb <= x <= ub                    (entries may be +-inf)
///              x[B0] >= || x[B1..] ||_2          for each SOC block B
///
/// P is assembled symmetric positive semidefinite by the callers (all
/// quadratic terms here come from Bernstein Gram matrices). Stage hints
/// describe the banded optimal-control layout; they are advisory.
struct ConicProblem {
  int num_vars = 0;
  std::vector<double> linear;  // c
  std::vector<double> lb, ub;
  std::vector<Eigen::Triplet<double>> quad;  // (i, j, v): adds v * x_i * x_j
  std::vector<Eigen::Triplet<double>> eq;    // (row, col, coeff)
  std::vector<double> eq_rhs;
  std::vector<std::vector<int>> soc_blocks;  // variable index slices

  // Structure hints for banded problems (stage count, vars per stage).
  int stage_count = 0;
  int stage_span = 0;

  int add_var(double lo = -kInf, double hi = kInf);
  int add_vars(int n, double lo = -kInf, double hi = kInf);
  void add_linear(int i, double v);
  void add_quad(int i, int j, double v);
  int add_eq(const std::vector<std::pair<int, double>>& terms, double rhs);
  void add_soc(std::vector<int> vars);
  void fix_var(int i, double value);

  int num_eq_rows() const { return static_cast<int>(eq_rhs.size()); }
};

enum class SolveStatus { optimal, infeasible, numerical_failure };

struct ConicSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd x;
  Eigen::VectorXd eq_dual;     // multiplier per equality row
  Eigen::VectorXd lower_dual;  // >= 0 per variable, zero where the bound is -inf
  Eigen::VectorXd upper_dual;  // >= 0 per variable, zero where the bound is +inf
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  std::string message;

  bool ok() const { return status == SolveStatus::optimal; }
};

struct SolveOptions {
  double tol = 1e-8;       // relative duality gap target
  double feas_tol = 1e-9;  // relative primal/dual residual target
  int max_iterations = 100;
  bool verbose = false;
};

/// Primal-dual interior-point solve with Nesterov-Todd scaling and a
/// Mehrotra predictor-corrector step. Reentrant; no shared mutable state.
ConicSolution solve(const ConicProblem& problem, const SolveOptions& options = {});

}  // namespace boxplan::conic
