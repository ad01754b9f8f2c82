#include "boxplan/linegraph.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>

#include "boxplan/conic.hpp"

namespace boxplan {

LineGraph LineGraph::build(const BoxSet& set) {
  LineGraph g;
  auto records = set.enumerate_intersections();
  g.vertices_.reserve(records.size());
  g.rep_points_.reserve(records.size());
  for (auto& rec : records) {
    g.rep_points_.push_back(rec.box.center());
    g.vertices_.push_back(LineGraphVertex{rec.k, rec.l, std::move(rec.box)});
  }

  // Vertices sharing a box form a clique; group them per box index. Two
  // distinct pairs share at most one box, so no edge is produced twice.
  std::vector<std::vector<int>> by_box(set.size());
  for (int v = 0; v < g.num_vertices(); ++v) {
    by_box[g.vertices_[v].k].push_back(v);
    by_box[g.vertices_[v].l].push_back(v);
  }
  for (int k = 0; k < set.size(); ++k) {
    const auto& members = by_box[k];
    for (size_t i = 0; i < members.size(); ++i) {
      for (size_t j = i + 1; j < members.size(); ++j) {
        g.edges_.emplace_back(members[i], members[j]);
        g.shared_box_.push_back(k);
      }
    }
  }
  std::vector<int> order(g.edges_.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return g.edges_[a] < g.edges_[b]; });
  std::vector<std::pair<int, int>> sorted_edges(g.edges_.size());
  std::vector<int> sorted_shared(g.edges_.size());
  for (size_t i = 0; i < order.size(); ++i) {
    sorted_edges[i] = g.edges_[order[i]];
    sorted_shared[i] = g.shared_box_[order[i]];
  }
  g.edges_ = std::move(sorted_edges);
  g.shared_box_ = std::move(sorted_shared);

  g.refresh_weights();
  g.rebuild_adjacency();
  return g;
}

void LineGraph::refresh_weights() {
  weights_.resize(edges_.size());
  for (size_t e = 0; e < edges_.size(); ++e) {
    weights_[e] = (rep_points_[edges_[e].first] - rep_points_[edges_[e].second]).norm();
  }
}

void LineGraph::rebuild_adjacency() {
  adj_offsets_.assign(num_vertices() + 1, 0);
  for (const auto& [v, w] : edges_) {
    ++adj_offsets_[v + 1];
    ++adj_offsets_[w + 1];
  }
  for (int v = 0; v < num_vertices(); ++v) adj_offsets_[v + 1] += adj_offsets_[v];
  adj_vertex_.resize(2 * edges_.size());
  adj_edge_.resize(2 * edges_.size());
  std::vector<int> cursor(adj_offsets_.begin(), adj_offsets_.end() - 1);
  for (size_t e = 0; e < edges_.size(); ++e) {
    const auto [v, w] = edges_[e];
    adj_vertex_[cursor[v]] = w;
    adj_edge_[cursor[v]++] = static_cast<int>(e);
    adj_vertex_[cursor[w]] = v;
    adj_edge_[cursor[w]++] = static_cast<int>(e);
  }
}

double LineGraph::total_edge_weight() const {
  double sum = 0.0;
  for (double w : weights_) sum += w;
  return sum;
}

void LineGraph::set_rep_points(std::vector<Vec> points) {
  if (points.size() != vertices_.size()) {
    throw std::invalid_argument("LineGraph::set_rep_points: wrong point count");
  }
  rep_points_ = std::move(points);
  refresh_weights();
}

void LineGraph::optimize_representative_points(double tol) {
  if (edges_.empty()) return;  // any feasible point is optimal

  // Vertices touched by at least one edge become variables; isolated ones
  // stay at their intersection centers.
  const int d = vertices_.front().intersection.dim();
  std::vector<int> var_of_vertex(num_vertices(), -1);
  conic::ConicProblem prob;
  for (const auto& [v, w] : edges_) {
    for (int vertex : {v, w}) {
      if (var_of_vertex[vertex] >= 0) continue;
      const Box& box = vertices_[vertex].intersection;
      const int base = prob.num_vars;
      for (int c = 0; c < d; ++c) prob.add_var(box.lower()[c], box.upper()[c]);
      var_of_vertex[vertex] = base;
    }
  }
  for (const auto& [v, w] : edges_) {
    const int diff = prob.add_vars(d);
    const int epi = prob.add_var();
    prob.add_linear(epi, 1.0);
    std::vector<int> cone{epi};
    for (int c = 0; c < d; ++c) {
      prob.add_eq({{diff + c, 1.0}, {var_of_vertex[v] + c, -1.0}, {var_of_vertex[w] + c, 1.0}},
                  0.0);
      cone.push_back(diff + c);
    }
    prob.add_soc(std::move(cone));
  }

  auto sol = conic::solve(prob, {.tol = tol});
  if (!sol.ok()) {
    throw std::runtime_error("representative-point optimization failed: " + sol.message);
  }

  std::vector<Vec> candidate = rep_points_;
  for (int v = 0; v < num_vertices(); ++v) {
    if (var_of_vertex[v] < 0) continue;
    Vec x = sol.x.segment(var_of_vertex[v], d);
    // Clamp into the intersection box so feasibility holds exactly.
    const Box& box = vertices_[v].intersection;
    x = x.cwiseMax(box.lower()).cwiseMin(box.upper());
    candidate[v] = std::move(x);
  }
  auto total = [&](const std::vector<Vec>& pts) {
    double sum = 0.0;
    for (const auto& [v, w] : edges_) sum += (pts[v] - pts[w]).norm();
    return sum;
  };
  // Keep the seeding when the solve did not improve on it, so the
  // optimization is monotone by construction.
  if (total(candidate) <= total(rep_points_)) {
    rep_points_ = std::move(candidate);
  }
  refresh_weights();
}

AugmentedQueryGraph augment(const LineGraph& graph, const BoxSet& set, const Vec& p_init,
                            const Vec& p_term) {
  if (p_init.size() != set.dim() || p_term.size() != set.dim()) {
    throw std::invalid_argument("augment: endpoint dimension mismatch");
  }
  AugmentedQueryGraph aug;
  aug.base = &graph;
  aug.p_init = p_init;
  aug.p_term = p_term;

  const auto init_boxes = set.stab(p_init);
  const auto term_boxes = set.stab(p_term);
  auto stabbed = [](const std::vector<int>& sorted, int k) {
    return std::binary_search(sorted.begin(), sorted.end(), k);
  };
  for (int v = 0; v < graph.num_vertices(); ++v) {
    const auto& vert = graph.vertices()[v];
    const bool hit_k = stabbed(init_boxes, vert.k);
    const bool hit_l = stabbed(init_boxes, vert.l);
    if (hit_k || hit_l) {
      aug.init_vertices.push_back(v);
      aug.init_link_box.push_back(hit_k ? vert.k : vert.l);
      aug.init_weights.push_back((p_init - graph.rep_points()[v]).norm());
    }
    const bool term_k = stabbed(term_boxes, vert.k);
    const bool term_l = stabbed(term_boxes, vert.l);
    if (term_k || term_l) {
      aug.term_vertices.push_back(v);
      aug.term_link_box.push_back(term_k ? vert.k : vert.l);
      aug.term_weights.push_back((p_term - graph.rep_points()[v]).norm());
    }
  }
  // The vertex augmentation covers paths through at least one intersection;
  // a direct edge handles one box containing both endpoints.
  for (int k : init_boxes) {
    if (stabbed(term_boxes, k)) {
      aug.direct_box = k;
      aug.direct_weight = (p_init - p_term).norm();
      break;  // boxes are sorted, so this is the smallest common index
    }
  }
  return aug;
}

std::optional<BoxPath> shortest_box_path(const LineGraph& graph, const BoxSet& set,
                                         const Vec& p_init, const Vec& p_term) {
  const AugmentedQueryGraph aug = augment(graph, set, p_init, p_term);
  const int nv = graph.num_vertices();
  const int init_id = nv;
  const int term_id = nv + 1;
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::vector<double> dist(nv + 2, inf);
  std::vector<int> pred(nv + 2, -1);
  std::vector<bool> done(nv + 2, false);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue;
  dist[init_id] = 0.0;
  queue.emplace(0.0, init_id);

  std::vector<double> term_weight_of(nv, -1.0);
  for (size_t i = 0; i < aug.term_vertices.size(); ++i) {
    term_weight_of[aug.term_vertices[i]] = aug.term_weights[i];
  }

  auto relax = [&](int from, int to, double weight) {
    const double cand = dist[from] + weight;
    if (cand < dist[to]) {
      dist[to] = cand;
      pred[to] = from;
      queue.emplace(cand, to);
    } else if (cand == dist[to] && !done[to] && from < pred[to]) {
      pred[to] = from;  // deterministic tie-break
    }
  };

  while (!queue.empty()) {
    auto [d, v] = queue.top();
    queue.pop();
    if (done[v] || d != dist[v]) continue;
    done[v] = true;
    if (v == term_id) break;
    if (v == init_id) {
      for (size_t i = 0; i < aug.init_vertices.size(); ++i) {
        relax(init_id, aug.init_vertices[i], aug.init_weights[i]);
      }
      if (aug.direct_box) relax(init_id, term_id, aug.direct_weight);
      continue;
    }
    for (int a = graph.adj_offsets()[v]; a < graph.adj_offsets()[v + 1]; ++a) {
      relax(v, graph.adj_vertex()[a], graph.edge_weights()[graph.adj_edge()[a]]);
    }
    if (term_weight_of[v] >= 0.0) relax(v, term_id, term_weight_of[v]);
  }

  if (dist[term_id] == inf) return std::nullopt;

  std::vector<int> chain;  // init .. term as graph ids
  for (int v = term_id; v != -1; v = pred[v]) chain.push_back(v);
  std::reverse(chain.begin(), chain.end());

  BoxPath path;
  path.nodes.push_back(p_init);
  if (chain.size() == 2) {
    path.nodes.push_back(p_term);
    path.box_seq.push_back(*aug.direct_box);
    return path;
  }
  auto init_link = [&](int v) {
    for (size_t i = 0; i < aug.init_vertices.size(); ++i) {
      if (aug.init_vertices[i] == v) return aug.init_link_box[i];
    }
    throw std::logic_error("shortest_box_path: missing init link");
  };
  auto term_link = [&](int v) {
    for (size_t i = 0; i < aug.term_vertices.size(); ++i) {
      if (aug.term_vertices[i] == v) return aug.term_link_box[i];
    }
    throw std::logic_error("shortest_box_path: missing term link");
  };
  auto shared_box = [&](int v, int w) {
    const auto& a = graph.vertices()[v];
    const auto& b = graph.vertices()[w];
    // Two distinct pairs share at most one index.
    if (a.k == b.k || a.k == b.l) return a.k;
    if (a.l == b.k || a.l == b.l) return a.l;
    throw std::logic_error("shortest_box_path: edge without shared box");
  };
  for (size_t i = 1; i + 1 < chain.size(); ++i) {
    path.nodes.push_back(graph.rep_points()[chain[i]]);
  }
  path.nodes.push_back(p_term);
  for (size_t i = 0; i + 1 < chain.size(); ++i) {
    const int a = chain[i];
    const int b = chain[i + 1];
    if (a == init_id) {
      path.box_seq.push_back(init_link(b));
    } else if (b == term_id) {
      path.box_seq.push_back(term_link(a));
    } else {
      path.box_seq.push_back(shared_box(a, b));
    }
  }
  return path;
}

}  // namespace boxplan
