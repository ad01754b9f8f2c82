#include "boxplan/smooth.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "boxplan/conic.hpp"

namespace boxplan {

void PlanningQuery::validate(int dim) const {
  if (p_init.size() != dim || p_term.size() != dim) {
    throw std::invalid_argument("query: endpoint dimension mismatch");
  }
  if (!(duration > 0.0)) {
    throw std::invalid_argument("query: final time must be positive");
  }
  if (alpha.empty()) {
    throw std::invalid_argument("query: at least one derivative weight required");
  }
  bool any_positive = false;
  for (double a : alpha) {
    if (a < 0.0) throw std::invalid_argument("query: negative derivative weight");
    if (a > 0.0) any_positive = true;
  }
  if (!any_positive) {
    throw std::invalid_argument("query: all derivative weights are zero");
  }
  if (degree != 0 && degree < depth() + 1) {
    throw std::invalid_argument("query: curve degree must be at least D + 1");
  }
  if (static_cast<int>(init_derivs.size()) > depth() ||
      static_cast<int>(term_derivs.size()) > depth()) {
    throw std::invalid_argument("query: boundary derivative order exceeds D");
  }
  for (const auto& v : init_derivs) {
    if (v.size() != dim) throw std::invalid_argument("query: boundary derivative dim mismatch");
  }
  for (const auto& v : term_derivs) {
    if (v.size() != dim) throw std::invalid_argument("query: boundary derivative dim mismatch");
  }
}

std::vector<double> SafetyMapTimes::knots() const {
  std::vector<double> out(times.size() + 1, 0.0);
  for (size_t j = 0; j < times.size(); ++j) out[j + 1] = out[j] + times[j];
  return out;
}

SafetyMapTimes init_traversal_times(const PolygonalCurve& curve, double total_time,
                                    bool boundary_derivs, double time_floor_rel) {
  const int n = curve.num_segments();
  if (n < 1) throw std::invalid_argument("init_traversal_times: empty curve");
  if (!(total_time > 0.0)) throw std::invalid_argument("init_traversal_times: T must be positive");

  std::vector<double> lens(n);
  double total_len = 0.0;
  for (int j = 0; j < n; ++j) {
    lens[j] = (curve.nodes[j + 1] - curve.nodes[j]).norm();
    total_len += lens[j];
  }

  std::vector<double> t(n);
  if (total_len <= 0.0) {
    // Coincident endpoints: distribute uniformly.
    for (int j = 0; j < n; ++j) t[j] = total_time / n;
  } else {
    std::vector<double> frac(n);
    for (int j = 0; j < n; ++j) frac[j] = lens[j] / total_len;
    if (boundary_derivs) {
      // Give the boundary pieces extra slack to meet their derivative
      // conditions; the alternation corrects the remaining error.
      frac[0] *= 2.0;
      frac[n - 1] *= 2.0;
    }
    double sum = 0.0;
    for (double f : frac) sum += f;
    for (int j = 0; j < n; ++j) t[j] = total_time * frac[j] / sum;
  }

  // Keep every duration strictly positive.
  const double floor = time_floor_rel * total_time;
  for (int pass = 0; pass < 2; ++pass) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      t[j] = std::max(t[j], floor);
      sum += t[j];
    }
    const double scale = total_time / sum;
    for (int j = 0; j < n; ++j) t[j] *= scale;
  }

  return SafetyMapTimes{curve.box_seq, std::move(t), total_time};
}

PiecewiseBezierPath PiecewiseBezierPath::from_positions(std::vector<int> box_seq,
                                                        std::vector<double> times,
                                                        std::vector<Eigen::MatrixXd> points,
                                                        int depth) {
  if (box_seq.size() != times.size() || box_seq.size() != points.size() || box_seq.empty()) {
    throw std::invalid_argument("PiecewiseBezierPath: inconsistent piece data");
  }
  PiecewiseBezierPath path;
  path.box_seq = std::move(box_seq);
  path.times = std::move(times);
  path.depth = depth;
  double t0 = 0.0;
  for (size_t j = 0; j < points.size(); ++j) {
    path.pieces.emplace_back(t0, t0 + path.times[j], std::move(points[j]));
    t0 += path.times[j];
  }
  path.derivs.resize(depth);
  for (int i = 1; i <= depth; ++i) {
    auto& level = path.derivs[i - 1];
    level.reserve(path.pieces.size());
    for (size_t j = 0; j < path.pieces.size(); ++j) {
      level.push_back((i == 1 ? path.pieces[j] : path.derivs[i - 2][j]).derivative());
    }
  }
  return path;
}

double PiecewiseBezierPath::duration() const { return pieces.back().end_time(); }

namespace {

int find_piece(const std::vector<BezierCurve>& pieces, double t) {
  if (t < pieces.front().start_time() || t > pieces.back().end_time()) {
    throw std::domain_error("PiecewiseBezierPath: time outside [0, T]");
  }
  auto it = std::partition_point(pieces.begin(), pieces.end(),
                                 [t](const BezierCurve& c) { return c.end_time() < t; });
  if (it == pieces.end()) --it;
  return static_cast<int>(it - pieces.begin());
}

}  // namespace

Vec PiecewiseBezierPath::eval(double t) const { return pieces[find_piece(pieces, t)].eval(t); }

Vec PiecewiseBezierPath::eval_derivative(double t, int order) const {
  if (order == 0) return eval(t);
  if (order < 1 || order > depth) {
    throw std::invalid_argument("PiecewiseBezierPath: derivative order out of range");
  }
  return derivs[order - 1][find_piece(pieces, t)].eval(t);
}

double PiecewiseBezierPath::cost(const std::vector<double>& alpha) const {
  double sum = 0.0;
  for (size_t i = 1; i <= alpha.size() && static_cast<int>(i) <= depth; ++i) {
    if (alpha[i - 1] == 0.0) continue;
    for (const auto& piece : derivs[i - 1]) sum += alpha[i - 1] * piece.squared_l2();
  }
  return sum;
}

namespace {

// Control-point variable layout with shared junction points, which makes
// continuity across pieces structural rather than a solver residual.
struct PointLayout {
  int N, M, D, d;
  std::vector<int> level_base;

  PointLayout(int n, int m, int depth, int dim) : N(n), M(m), D(depth), d(dim) {
    level_base.resize(depth + 1);
    int acc = 0;
    for (int i = 0; i <= depth; ++i) {
      level_base[i] = acc;
      acc += level_points(i) * d;
    }
    total = acc;
  }

  int level_points(int i) const { return N * (M - i) + 1; }
  int var(int i, int j, int n, int c) const {
    return level_base[i] + (j * (M - i) + n) * d + c;
  }
  int total = 0;
};

// Adds the shared control-point variables with safety bounds on level zero
// and the boundary equality rows. Used by both control programs.
PointLayout add_point_variables(conic::ConicProblem& prob, const SafetyMapTimes& map,
                                const PlanningQuery& query, const BoxSet& set) {
  const int n = map.num_segments();
  const int m = query.curve_degree();
  const int depth = query.depth();
  const int d = set.dim();
  PointLayout lay(n, m, depth, d);

  // Level 0: interior points bounded by their piece's box, junction points
  // by both adjacent boxes.
  for (int i = 0; i <= depth; ++i) {
    const int count = lay.level_points(i);
    for (int pt = 0; pt < count; ++pt) {
      for (int c = 0; c < d; ++c) {
        double lo = -conic::kInf, hi = conic::kInf;
        if (i == 0) {
          const int stride = m;  // points per piece at level 0, minus shared
          const int piece = std::min(pt / stride, n - 1);
          const int local = pt - piece * stride;
          const Box& own = set.box(map.box_seq[piece]);
          lo = own.lower()[c];
          hi = own.upper()[c];
          if (local == 0 && piece > 0) {
            const Box& prev = set.box(map.box_seq[piece - 1]);
            lo = std::max(lo, prev.lower()[c]);
            hi = std::min(hi, prev.upper()[c]);
          }
        }
        prob.add_var(lo, hi);
      }
    }
  }
  if (prob.num_vars != lay.total) {
    throw std::logic_error("smooth: variable layout mismatch");
  }

  // Boundary values, Eq-style pins on the first and last control points.
  for (int c = 0; c < d; ++c) {
    prob.fix_var(lay.var(0, 0, 0, c), query.p_init[c]);
    prob.fix_var(lay.var(0, n - 1, m, c), query.p_term[c]);
  }
  for (size_t i = 1; i <= query.init_derivs.size(); ++i) {
    for (int c = 0; c < d; ++c) {
      prob.fix_var(lay.var(static_cast<int>(i), 0, 0, c), query.init_derivs[i - 1][c]);
    }
  }
  for (size_t i = 1; i <= query.term_derivs.size(); ++i) {
    for (int c = 0; c < d; ++c) {
      prob.fix_var(lay.var(static_cast<int>(i), n - 1, m - static_cast<int>(i), c),
                   query.term_derivs[i - 1][c]);
    }
  }
  return lay;
}

std::vector<Eigen::MatrixXd> extract_positions(const Eigen::VectorXd& x, const PointLayout& lay,
                                               const PlanningQuery& query) {
  std::vector<Eigen::MatrixXd> points(lay.N);
  for (int j = 0; j < lay.N; ++j) {
    points[j].resize(lay.d, lay.M + 1);
    for (int n = 0; n <= lay.M; ++n) {
      for (int c = 0; c < lay.d; ++c) points[j](c, n) = x[lay.var(0, j, n, c)];
    }
  }
  // Snap the endpoints exactly; the solver meets them only to its residual.
  points.front().col(0) = query.p_init;
  points.back().col(lay.M) = query.p_term;
  return points;
}

void check_times(const SafetyMapTimes& map) {
  if (map.box_seq.size() != map.times.size() || map.box_seq.empty()) {
    throw std::invalid_argument("smooth: inconsistent safety map");
  }
  for (double t : map.times) {
    if (!(t > 0.0)) throw std::invalid_argument("smooth: traversal times must be positive");
  }
}

}  // namespace

ProjectionResult projection(const SafetyMapTimes& map, const PlanningQuery& query,
                            const BoxSet& set, double tol) {
  check_times(map);
  query.validate(set.dim());
  const int n = map.num_segments();
  const int m = query.curve_degree();
  const int depth = query.depth();
  const int d = set.dim();

  conic::ConicProblem prob;
  prob.stage_count = n;
  PointLayout lay = add_point_variables(prob, map, query, set);
  prob.stage_span = lay.total / std::max(1, n);

  // Difference recursion, scaled by T_j to keep coefficients bounded:
  //   T_j p(i, j, n) - (M - i + 1) (p(i-1, j, n+1) - p(i-1, j, n)) = 0.
  for (int i = 1; i <= depth; ++i) {
    const double factor = static_cast<double>(m - i + 1);
    for (int j = 0; j < n; ++j) {
      for (int nn = 0; nn <= m - i; ++nn) {
        for (int c = 0; c < d; ++c) {
          prob.add_eq({{lay.var(i, j, nn, c), map.times[j]},
                       {lay.var(i - 1, j, nn + 1, c), -factor},
                       {lay.var(i - 1, j, nn, c), factor}},
                      0.0);
        }
      }
    }
  }

  // Weighted derivative energies: alpha_i T_j Q(p^(i) of piece j).
  for (int i = 1; i <= depth; ++i) {
    if (query.alpha[i - 1] == 0.0) continue;
    const Eigen::MatrixXd w = QForm(m - i).matrix();
    for (int j = 0; j < n; ++j) {
      const double scale = query.alpha[i - 1] * map.times[j];
      for (int a = 0; a <= m - i; ++a) {
        for (int b = a; b <= m - i; ++b) {
          const double coeff = (a == b) ? scale * w(a, a) : 2.0 * scale * w(a, b);
          for (int c = 0; c < d; ++c) {
            prob.add_quad(lay.var(i, j, a, c), lay.var(i, j, b, c), coeff);
          }
        }
      }
    }
  }

  auto sol = conic::solve(prob, {.tol = tol});
  if (!sol.ok()) {
    throw std::runtime_error("projection solve failed: " + sol.message);
  }
  ProjectionResult out{
      PiecewiseBezierPath::from_positions(map.box_seq, map.times,
                                          extract_positions(sol.x, lay, query), depth),
      sol.objective};
  return out;
}

TangentResult tangent(const SafetyMapTimes& map, const PiecewiseBezierPath& path,
                      const TrustState& trust, const PlanningQuery& query, const BoxSet& set,
                      double tol, double time_floor_rel) {
  check_times(map);
  query.validate(set.dim());
  const int n = map.num_segments();
  const int m = query.curve_degree();
  const int depth = query.depth();
  const int d = set.dim();
  if (path.num_pieces() != n) {
    throw std::invalid_argument("tangent: path does not match the safety map");
  }

  // A vanishing trust region pins the times.
  if (trust.kappa < 1e-12) {
    return TangentResult{map.times, path.cost(query.alpha)};
  }

  const double floor = time_floor_rel * map.total;

  conic::ConicProblem prob;
  prob.stage_count = n;
  PointLayout lay = add_point_variables(prob, map, query, set);

  // Traversal times under the trust region and the positivity floor.
  std::vector<int> time_var(n);
  std::vector<std::pair<int, double>> sum_row;
  for (int j = 0; j < n; ++j) {
    const double tbar = map.times[j];
    const double lo = std::max(floor, tbar / (1.0 + trust.kappa));
    const double hi = tbar * (1.0 + trust.kappa);
    time_var[j] = prob.add_var(lo, hi);
    sum_row.emplace_back(time_var[j], 1.0);
  }
  prob.add_eq(sum_row, map.total);

  // Scaled derivative points q = T p^(i), linear through the exact
  // difference recursion in the level below.
  std::vector<std::vector<int>> q_base(depth + 1, std::vector<int>(n, -1));
  for (int i = 1; i <= depth; ++i) {
    const double factor = static_cast<double>(m - i + 1);
    for (int j = 0; j < n; ++j) {
      q_base[i][j] = prob.add_vars((m - i + 1) * d);
      for (int nn = 0; nn <= m - i; ++nn) {
        for (int c = 0; c < d; ++c) {
          const int q = q_base[i][j] + nn * d + c;
          prob.add_eq({{q, 1.0},
                       {lay.var(i - 1, j, nn + 1, c), -factor},
                       {lay.var(i - 1, j, nn, c), factor}},
                      0.0);
          // Linearized bilinear coupling q = T pbar + Tbar p - Tbar pbar.
          const double pbar = path.derivs[i - 1][j].control_points()(c, nn);
          prob.add_eq({{q, 1.0}, {lay.var(i, j, nn, c), -map.times[j]}, {time_var[j], -pbar}},
                      -map.times[j] * pbar);
        }
      }
    }
  }

  // Epigraph of each quadratic-over-linear energy through a rotated cone:
  // u T >= ||F q||^2 as (u + T) >= || (2 F q, u - T) ||.
  for (int i = 1; i <= depth; ++i) {
    if (query.alpha[i - 1] == 0.0) continue;
    const Eigen::MatrixXd w = QForm(m - i).matrix();
    const Eigen::MatrixXd f = Eigen::LLT<Eigen::MatrixXd>(w).matrixL().transpose();
    const int rows = m - i + 1;
    for (int j = 0; j < n; ++j) {
      const int u = prob.add_var();
      prob.add_linear(u, query.alpha[i - 1]);
      const int apex = prob.add_var();
      prob.add_eq({{apex, 1.0}, {u, -1.0}, {time_var[j], -1.0}}, 0.0);
      const int last = prob.add_var();
      prob.add_eq({{last, 1.0}, {u, -1.0}, {time_var[j], 1.0}}, 0.0);
      std::vector<int> cone{apex};
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < d; ++c) {
          const int zv = prob.add_var();
          std::vector<std::pair<int, double>> row{{zv, 1.0}};
          for (int nn = 0; nn <= m - i; ++nn) {
            if (f(r, nn) != 0.0) row.emplace_back(q_base[i][j] + nn * d + c, -2.0 * f(r, nn));
          }
          prob.add_eq(row, 0.0);
          cone.push_back(zv);
        }
      }
      cone.push_back(last);
      prob.add_soc(std::move(cone));
    }
  }

  auto sol = conic::solve(prob, {.tol = tol});
  if (!sol.ok()) {
    throw std::runtime_error("tangent solve failed: " + sol.message);
  }

  TangentResult out;
  out.predicted_cost = sol.objective;
  out.times.resize(n);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    const double tbar = map.times[j];
    const double lo = std::max(floor, tbar / (1.0 + trust.kappa));
    const double hi = tbar * (1.0 + trust.kappa);
    out.times[j] = std::clamp(sol.x[time_var[j]], lo, hi);
    sum += out.times[j];
  }
  // Restore the exact time budget; the scaling is within solver residual.
  const double scale = map.total / sum;
  for (double& t : out.times) t *= scale;
  return out;
}

TrustState trust_update(const TrustState& trust, const std::vector<double>& t_bar,
                        const std::vector<double>& t_star) {
  if (t_bar.size() != t_star.size() || t_bar.empty()) {
    throw std::invalid_argument("trust_update: time vectors inconsistent");
  }
  double worst = 1.0;
  for (size_t j = 0; j < t_bar.size(); ++j) {
    if (!(t_bar[j] > 0.0) || !(t_star[j] > 0.0)) {
      throw std::invalid_argument("trust_update: times must be positive");
    }
    worst = std::max({worst, t_bar[j] / t_star[j], t_star[j] / t_bar[j]});
  }
  const double raw = (worst - 1.0) / trust.omega;
  const double bound = trust.kappa / trust.omega;
  if (raw > bound * (1.0 + 1e-6) + 1e-12) {
    throw std::logic_error("trust_update: ratio outside the trust region");
  }
  TrustState next = trust;
  next.kappa = std::min(raw, bound);
  next.iteration = trust.iteration + 1;
  return next;
}

SmoothResult smooth_phase(const PolygonalCurve& curve, const PlanningQuery& query,
                          const BoxSet& set, const SmoothParams& params) {
  query.validate(set.dim());
  if (curve.nodes.size() != curve.box_seq.size() + 1 || curve.box_seq.empty()) {
    throw std::invalid_argument("smooth_phase: malformed polygonal curve");
  }

  SafetyMapTimes map = init_traversal_times(curve, query.duration, query.has_boundary_derivs(),
                                            params.time_floor_rel);
  ProjectionResult proj = projection(map, query, set, params.projection_tol);

  SmoothResult result;
  result.path = proj.path;
  result.cost = proj.cost;
  result.first_projection_cost = proj.cost;
  result.accepted_costs.push_back(proj.cost);

  TrustState trust = params.trust;
  for (int it = 1; it <= params.max_iterations; ++it) {
    if (result.cost <= 1e-12) break;  // already at the global minimum

    const std::vector<double> t_bar = map.times;
    TangentResult tan = tangent(map, result.path, trust, query, set, params.tangent_tol,
                                params.time_floor_rel);
    const double gap = (result.cost - tan.predicted_cost) / result.cost;
    result.proj_tangent.emplace_back(result.cost, tan.predicted_cost);

    SafetyMapTimes candidate{map.box_seq, tan.times, map.total};
    ProjectionResult reproj = projection(candidate, query, set, params.projection_tol);
    if (reproj.cost < result.cost) {
      result.path = std::move(reproj.path);
      result.cost = reproj.cost;
      map = std::move(candidate);
    }
    result.accepted_costs.push_back(result.cost);
    trust = trust_update(trust, t_bar, tan.times);
    result.kappa_trace.push_back(trust.kappa);
    result.iterations = it;

    if (gap < trust.epsilon) break;
    if (it == params.max_iterations) result.hit_iteration_cap = true;
  }
  return result;
}

}  // namespace boxplan
