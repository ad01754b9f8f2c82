#pragma once

#include <utility>
#include <vector>

#include "boxplan/bezier.hpp"
#include "boxplan/geometry.hpp"
#include "boxplan/polygonal.hpp"

namespace boxplan {

/// One planning request: endpoints, final time, derivative weights (their
/// count sets the smoothness order D), optional boundary derivative values,
/// and the curve degree (0 means the default 2D + 1, which guarantees every
/// projection problem is feasible).
struct PlanningQuery {
  Vec p_init, p_term;
  double duration = 1.0;             // T
  std::vector<double> alpha;         // weights of derivatives 1..D
  int degree = 0;                    // M; 0 selects 2D + 1
  std::vector<Vec> init_derivs;      // values of derivatives 1..R at t = 0
  std::vector<Vec> term_derivs;      // values of derivatives 1..R at t = T

  int depth() const { return static_cast<int>(alpha.size()); }
  int curve_degree() const { return degree > 0 ? degree : 2 * depth() + 1; }
  bool has_boundary_derivs() const { return !init_derivs.empty() || !term_derivs.empty(); }
  void validate(int dim) const;
};

/// Box sequence plus traversal times: a complete safety map. Times are
/// positive and sum to the final time.
struct SafetyMapTimes {
  std::vector<int> box_seq;
  std::vector<double> times;
  double total = 0.0;

  int num_segments() const { return static_cast<int>(box_seq.size()); }
  std::vector<double> knots() const;  // t_0 = 0 .. t_N = total
};

/// Piecewise Bezier path over a safety map. Pieces join continuously up to
/// derivative order depth; all control points of piece j lie in box s_j, so
/// the whole path stays in the safe set. Derivative control points are
/// cached by the exact difference recursion from the position points.
struct PiecewiseBezierPath {
  std::vector<int> box_seq;
  std::vector<double> times;
  std::vector<BezierCurve> pieces;
  int depth = 0;
  // derivs[i-1][j] is the order-i derivative of piece j.
  std::vector<std::vector<BezierCurve>> derivs;

  static PiecewiseBezierPath from_positions(std::vector<int> box_seq, std::vector<double> times,
                                            std::vector<Eigen::MatrixXd> position_points,
                                            int depth);

  int num_pieces() const { return static_cast<int>(pieces.size()); }
  int dim() const { return pieces.front().dim(); }
  double duration() const;
  Vec eval(double t) const;
  Vec eval_derivative(double t, int order) const;

  /// Objective value sum_i alpha_i integral ||p^(i)||^2 for this path.
  double cost(const std::vector<double>& alpha) const;
};

/// Trust region state for the time-allocation alternation. kappa bounds the
/// relative variation of the traversal times per tangent solve and shrinks
/// at least geometrically (factor omega) across iterations.
struct TrustState {
  double kappa = 1.0;
  double omega = 3.0;
  double epsilon = 1e-2;
  int iteration = 0;
};

struct SmoothParams {
  TrustState trust;
  int max_iterations = 30;
  double projection_tol = 1e-6;
  double tangent_tol = 1e-6;
  double time_floor_rel = 1e-6;  // T_j >= this fraction of T
};

/// Constant-speed traversal-time estimate: T_j proportional to segment
/// length. With boundary derivative conditions the first and last segments
/// are inflated by a factor two before renormalizing, giving the endpoint
/// pieces slack to meet their constraints.
SafetyMapTimes init_traversal_times(const PolygonalCurve& curve, double total_time,
                                    bool boundary_derivs, double time_floor_rel = 1e-6);

struct ProjectionResult {
  PiecewiseBezierPath path;
  double cost = 0.0;
};

/// Solves the fixed-times convex program: minimize the weighted derivative
/// energies subject to boundary, continuity, safety, and the derivative
/// recursion. Feasible whenever M >= 2D + 1; solver failure throws.
ProjectionResult projection(const SafetyMapTimes& map, const PlanningQuery& query,
                            const BoxSet& set, double tol = 1e-6);

struct TangentResult {
  std::vector<double> times;
  double predicted_cost = 0.0;
};

/// Solves the time-improvement cone program linearized around the given
/// path and times, under the trust region and the time floor. Only the
/// optimal times are retained.
TangentResult tangent(const SafetyMapTimes& map, const PiecewiseBezierPath& path,
                      const TrustState& trust, const PlanningQuery& query, const BoxSet& set,
                      double tol = 1e-6, double time_floor_rel = 1e-6);

/// kappa update from the observed time ratios; never larger than kappa /
/// omega, so the trust region contracts at least geometrically.
TrustState trust_update(const TrustState& trust, const std::vector<double>& t_bar,
                        const std::vector<double>& t_star);

struct SmoothResult {
  PiecewiseBezierPath path;
  double cost = 0.0;
  double first_projection_cost = 0.0;
  int iterations = 0;
  bool hit_iteration_cap = false;
  std::vector<double> accepted_costs;                 // best cost after each iteration
  std::vector<std::pair<double, double>> proj_tangent;  // (J_proj, J_tan) per iteration
  std::vector<double> kappa_trace;
};

/// The full smooth phase: time initialization, then the projection/tangent
/// alternation with trust-region shrinking, until the normalized gap falls
/// below epsilon or the iteration cap is reached. Always returns the best
/// feasible path found.
SmoothResult smooth_phase(const PolygonalCurve& curve, const PlanningQuery& query,
                          const BoxSet& set, const SmoothParams& params = {});

}  // namespace boxplan
