#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "boxplan/geometry.hpp"

namespace boxplan {

struct LineGraphVertex {
  int k, l;          // box indices, k < l
  Box intersection;  // the (possibly degenerate) overlap region
};

/// Graph whose vertices are intersecting box pairs and whose edges join
/// pairs sharing a box. Each vertex carries a representative point inside
/// its intersection; each edge carries the Euclidean distance between the
/// representative points it joins. Immutable once the points are optimized;
/// shortest-path queries build their own augmentation and may run
/// concurrently over a shared graph.
class LineGraph {
 public:
  static LineGraph build(const BoxSet& set);

  const std::vector<LineGraphVertex>& vertices() const { return vertices_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& edge_shared_box() const { return shared_box_; }
  const std::vector<Vec>& rep_points() const { return rep_points_; }
  const std::vector<double>& edge_weights() const { return weights_; }

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  /// Sum of edge weights, the objective of the representative-point program.
  double total_edge_weight() const;

  /// Moves the representative points to approximately minimize the total
  /// edge length, each constrained to its intersection box. Never worse
  /// than the center seeding; refreshes the edge weights. Throws on solver
  /// failure.
  void optimize_representative_points(double tol = 1e-4);

  /// Used by the cache loader to restore previously optimized points.
  void set_rep_points(std::vector<Vec> points);

  // Adjacency in CSR form for shortest-path queries.
  const std::vector<int>& adj_offsets() const { return adj_offsets_; }
  const std::vector<int>& adj_vertex() const { return adj_vertex_; }
  const std::vector<int>& adj_edge() const { return adj_edge_; }

 private:
  std::vector<LineGraphVertex> vertices_;
  std::vector<std::pair<int, int>> edges_;  // vertex id pairs, v < w
  std::vector<int> shared_box_;             // box shared by the edge's pairs
  std::vector<Vec> rep_points_;
  std::vector<double> weights_;
  std::vector<int> adj_offsets_, adj_vertex_, adj_edge_;

  void rebuild_adjacency();
  void refresh_weights();
};

/// The line graph augmented with two query endpoints. p_init links to every
/// vertex {k, l} with p_init in box k or box l, and symmetrically for
/// p_term; a direct edge is added when one box contains both endpoints.
struct AugmentedQueryGraph {
  const LineGraph* base = nullptr;
  Vec p_init, p_term;
  std::vector<int> init_vertices, term_vertices;  // linked vertex ids
  std::vector<int> init_link_box, term_link_box;  // smallest containing box
  std::vector<double> init_weights, term_weights;
  std::optional<int> direct_box;  // box containing both endpoints
  double direct_weight = 0.0;
};

AugmentedQueryGraph augment(const LineGraph& graph, const BoxSet& set, const Vec& p_init,
                            const Vec& p_term);

/// A safe polygonal connection: nodes y_0..y_N plus one covering box per
/// segment.
struct BoxPath {
  std::vector<Vec> nodes;
  std::vector<int> box_seq;
};

/// Shortest path through the augmented line graph. Returns nothing exactly
/// when the endpoints cannot be connected through the safe set, which
/// certifies infeasibility of the planning problem.
std::optional<BoxPath> shortest_box_path(const LineGraph& graph, const BoxSet& set,
                                         const Vec& p_init, const Vec& p_term);

}  // namespace boxplan
