#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

namespace boxplan {

using Vec = Eigen::VectorXd;

/// Axis-aligned box {x : l <= x <= u}. Bounds are closed; zero-width sides
/// are allowed, so a box may be degenerate down to a single point.
class Box {
 public:
  Box(Vec lower, Vec upper);

  int dim() const { return static_cast<int>(l_.size()); }
  const Vec& lower() const { return l_; }
  const Vec& upper() const { return u_; }
  Vec center() const { return 0.5 * (l_ + u_); }

  /// Closed containment test; points on the boundary count as inside.
  bool contains(const Vec& x) const;

 private:
  Vec l_, u_;
};

/// Intersection of two boxes of the same dimension, or nothing when they are
/// disjoint. Touching faces produce a degenerate (zero-volume) box.
std::optional<Box> box_intersection(const Box& a, const Box& b);

struct IntersectionRecord {
  int k, l;  // box indices with k < l
  Box box;   // the (possibly degenerate) intersection
};

/// An immutable collection of same-dimension boxes with a per-dimension
/// sorted interval index for sweep joins and point stabbing. All queries are
/// read-only and safe for concurrent use.
class BoxSet {
 public:
  explicit BoxSet(std::vector<Box> boxes);

  int size() const { return static_cast<int>(boxes_.size()); }
  int dim() const { return boxes_.front().dim(); }
  const Box& box(int k) const { return boxes_[k]; }
  const std::vector<Box>& boxes() const { return boxes_; }

  /// All indices k with x in box k (closed), in increasing order.
  std::vector<int> stab(const Vec& x) const;

  /// Every unordered pair of intersecting boxes, in lexicographic (k, l)
  /// order. Comparisons are exact; degenerate contacts are reported.
  std::vector<IntersectionRecord> enumerate_intersections() const;

  /// Diameter of the bounding box of the whole set; used as the length
  /// scale for merge tolerances downstream.
  double bounding_diameter() const;

 private:
  std::vector<Box> boxes_;
  // Per dimension, box ids sorted by (lower bound, id); values_ mirrors the
  // lower bounds in the same order. Rebuildable, and the tie-break makes the
  // ordering bit-identical across rebuilds.
  std::vector<std::vector<int>> order_;
  std::vector<std::vector<double>> values_;
};

}  // namespace boxplan
