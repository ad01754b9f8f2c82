#include "boxplan/polygonal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "boxplan/conic.hpp"

namespace boxplan {

double PolygonalCurve::length() const {
  double sum = 0.0;
  for (size_t j = 1; j < nodes.size(); ++j) sum += (nodes[j] - nodes[j - 1]).norm();
  return sum;
}

namespace {

void validate_curve(const PolygonalCurve& curve, const BoxSet& set) {
  if (curve.nodes.size() != curve.box_seq.size() + 1 || curve.box_seq.empty()) {
    throw std::invalid_argument("polygonal: node and box sequence sizes inconsistent");
  }
  for (int s : curve.box_seq) {
    if (s < 0 || s >= set.size()) {
      throw std::invalid_argument("polygonal: box index out of range");
    }
  }
}

}  // namespace

PolygonalCurve solve_shortening(const PolygonalCurve& curve, const BoxSet& set, double tol) {
  validate_curve(curve, set);
  const int n = curve.num_segments();
  if (n <= 1) return curve;  // no free nodes
  const int d = set.dim();

  conic::ConicProblem prob;
  prob.stage_count = n;
  // Junction nodes y_1..y_{N-1}, each bounded by its two covering boxes.
  std::vector<int> node_var(n + 1, -1);
  for (int j = 1; j < n; ++j) {
    const Box& a = set.box(curve.box_seq[j - 1]);
    const Box& b = set.box(curve.box_seq[j]);
    node_var[j] = prob.num_vars;
    for (int c = 0; c < d; ++c) {
      prob.add_var(std::max(a.lower()[c], b.lower()[c]), std::min(a.upper()[c], b.upper()[c]));
    }
  }
  for (int j = 1; j <= n; ++j) {
    const int diff = prob.add_vars(d);
    const int epi = prob.add_var();
    prob.add_linear(epi, 1.0);
    std::vector<int> cone{epi};
    for (int c = 0; c < d; ++c) {
      std::vector<std::pair<int, double>> terms{{diff + c, 1.0}};
      double rhs = 0.0;
      if (node_var[j] >= 0) {
        terms.emplace_back(node_var[j] + c, -1.0);
      } else {
        rhs -= curve.nodes[j][c];  // fixed terminal node
      }
      if (node_var[j - 1] >= 0) {
        terms.emplace_back(node_var[j - 1] + c, 1.0);
      } else {
        rhs += curve.nodes[j - 1][c];  // fixed initial node
      }
      prob.add_eq(terms, rhs);
      cone.push_back(diff + c);
    }
    prob.add_soc(std::move(cone));
  }

  auto sol = conic::solve(prob, {.tol = tol});
  if (!sol.ok()) {
    throw std::runtime_error("shortening solve failed: " + sol.message);
  }

  PolygonalCurve out = curve;
  for (int j = 1; j < n; ++j) {
    Vec y = sol.x.segment(node_var[j], d);
    const Box& a = set.box(curve.box_seq[j - 1]);
    const Box& b = set.box(curve.box_seq[j]);
    // Clamp into the junction box so segment containment holds exactly.
    y = y.cwiseMax(a.lower().cwiseMax(b.lower())).cwiseMin(a.upper().cwiseMin(b.upper()));
    out.nodes[j] = std::move(y);
  }
  // The input nodes are feasible, so the optimum cannot be longer; guard
  // against solver slop on degenerate instances.
  if (out.length() > curve.length()) return curve;
  return out;
}

PolygonalCurve dedup_nodes(const PolygonalCurve& curve, double tol) {
  PolygonalCurve out;
  out.nodes.push_back(curve.nodes.front());
  for (int j = 1; j <= curve.num_segments(); ++j) {
    const bool last = (j == curve.num_segments());
    if ((curve.nodes[j] - out.nodes.back()).norm() <= tol && curve.num_segments() > 1 &&
        !(last && out.nodes.size() == 1)) {
      // Collapse this segment; keep the terminal node value exact.
      if (last) out.nodes.back() = curve.nodes[j];
      continue;
    }
    out.nodes.push_back(curve.nodes[j]);
    out.box_seq.push_back(curve.box_seq[j - 1]);
  }
  if (out.box_seq.size() != out.nodes.size() - 1) {
    throw std::logic_error("dedup_nodes: bookkeeping mismatch");
  }
  return out;
}

PolygonalCurve shorten_fixed_sequence(const PolygonalCurve& curve, const BoxSet& set, double tol) {
  PolygonalCurve shortened = solve_shortening(curve, set, tol);
  return dedup_nodes(shortened, 1e-9 * set.bounding_diameter());
}

InsertionCertificate insertion_test(const PolygonalCurve& curve, int j, int k, const BoxSet& set,
                                    double active_tol) {
  validate_curve(curve, set);
  const int n = curve.num_segments();
  if (j < 1 || j > n - 1) {
    throw std::invalid_argument("insertion_test: node index must be interior");
  }
  const Vec& y = curve.nodes[j];
  if (!set.box(k).contains(y)) {
    throw std::invalid_argument("insertion_test: candidate box does not contain the node");
  }
  const Vec into = y - curve.nodes[j - 1];
  const Vec out = curve.nodes[j + 1] - y;
  const double len_in = into.norm();
  const double len_out = out.norm();
  if (len_in == 0.0 || len_out == 0.0) {
    throw std::invalid_argument("insertion_test: zero-length adjacent segment; dedup first");
  }

  const int d = set.dim();
  InsertionCertificate cert;
  cert.node_index = j;
  cert.candidate_box = k;
  cert.lambda1 = into / len_in;
  cert.lambda2 = out / len_out;
  cert.c1 = Vec::Constant(d, -std::numeric_limits<double>::infinity());
  cert.c2 = Vec::Constant(d, std::numeric_limits<double>::infinity());

  const Box& cand = set.box(k);
  const Box& before = set.box(curve.box_seq[j - 1]);
  const Box& after = set.box(curve.box_seq[j]);
  auto active = [&](double value, double bound) {
    return std::abs(value - bound) <= active_tol * (1.0 + std::abs(bound));
  };
  for (int c = 0; c < d; ++c) {
    // First split box: B_{s_j} n B_k around the incoming direction.
    const double l1 = std::max(before.lower()[c], cand.lower()[c]);
    const double u1 = std::min(before.upper()[c], cand.upper()[c]);
    if (!active(y[c], l1)) cert.c1[c] = std::max(cert.c1[c], cert.lambda1[c]);
    if (!active(y[c], u1)) cert.c2[c] = std::min(cert.c2[c], cert.lambda1[c]);
    // Second split box: B_k n B_{s_{j+1}}, signs mirrored.
    const double l2 = std::max(cand.lower()[c], after.lower()[c]);
    const double u2 = std::min(cand.upper()[c], after.upper()[c]);
    if (!active(y[c], l2)) cert.c2[c] = std::min(cert.c2[c], cert.lambda2[c]);
    if (!active(y[c], u2)) cert.c1[c] = std::max(cert.c1[c], cert.lambda2[c]);
  }

  cert.lambda_star = cert.c2.cwiseMin(cert.c1.cwiseMax(Vec::Zero(d)));
  bool consistent = true;
  for (int c = 0; c < d; ++c) {
    if (cert.c1[c] > cert.c2[c]) consistent = false;
  }
  // An empty bound interval means the dual system has no solution at all:
  // the minimum norm over the empty set is +inf.
  cert.norm = consistent ? cert.lambda_star.norm() : std::numeric_limits<double>::infinity();
  cert.insert = cert.norm > 1.0;
  return cert;
}

std::pair<PolygonalCurve, bool> improve_sequence(const PolygonalCurve& curve, const BoxSet& set) {
  validate_curve(curve, set);
  const int n = curve.num_segments();
  std::vector<std::pair<int, int>> splices;  // (node index, box)
  for (int j = 1; j <= n - 1; ++j) {
    const auto stabbed = set.stab(curve.nodes[j]);
    double best_norm = 1.0;
    int best_box = -1;
    for (int k : stabbed) {
      if (k == curve.box_seq[j - 1] || k == curve.box_seq[j]) continue;
      const auto cert = insertion_test(curve, j, k, set);
      if (cert.insert && cert.norm > best_norm) {
        best_norm = cert.norm;
        best_box = k;
      }
    }
    if (best_box >= 0) splices.emplace_back(j, best_box);
  }
  if (splices.empty()) return {curve, false};

  PolygonalCurve out;
  size_t next = 0;
  out.nodes.push_back(curve.nodes[0]);
  for (int j = 1; j <= n; ++j) {
    if (next < splices.size() && splices[next].first == j - 1) {
      // Splice happens between segments j-1 and j: duplicate the node and
      // cover the new zero-length segment with the inserted box.
      out.nodes.push_back(curve.nodes[j - 1]);
      out.box_seq.push_back(splices[next].second);
      ++next;
    }
    out.nodes.push_back(curve.nodes[j]);
    out.box_seq.push_back(curve.box_seq[j - 1]);
  }
  return {out, true};
}

PolygonalResult polygonal_phase(const LineGraph& graph, const BoxSet& set, const Vec& p_init,
                                const Vec& p_term) {
  PolygonalResult result;
  auto path = shortest_box_path(graph, set, p_init, p_term);
  if (!path) return result;

  PolygonalCurve curve{std::move(path->nodes), std::move(path->box_seq)};
  const int cap = 2 * set.size() + 10;
  while (true) {
    ++result.rounds;
    if (result.rounds > cap) {
      throw std::runtime_error("polygonal_phase: iteration cap exceeded (" +
                               std::to_string(cap) + " rounds)");
    }
    curve = shorten_fixed_sequence(curve, set);
    auto [next, inserted] = improve_sequence(curve, set);
    if (!inserted) break;
    result.insertions += next.num_segments() - curve.num_segments();
    curve = std::move(next);
  }
  result.curve = std::move(curve);
  return result;
}

}  // namespace boxplan
