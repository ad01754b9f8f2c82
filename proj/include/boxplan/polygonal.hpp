#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "boxplan/geometry.hpp"
#include "boxplan/linegraph.hpp"

namespace boxplan {

/// Polygonal curve through the safe set: nodes y_0..y_N with one covering
/// box per segment. Both endpoints of segment j lie in box s_j, so by
/// convexity the whole segment does.
struct PolygonalCurve {
  std::vector<Vec> nodes;
  std::vector<int> box_seq;

  int num_segments() const { return static_cast<int>(box_seq.size()); }
  double length() const;
};

/// Raw solve of the fixed-sequence shortening program: minimizes total
/// length over the junction nodes, endpoints pinned. No node merging; used
/// directly by the oracle, which must keep the sequence intact.
PolygonalCurve solve_shortening(const PolygonalCurve& curve, const BoxSet& set,
                                double tol = 1e-7);

/// Shortening followed by the merge of coincident consecutive nodes
/// (tolerance 1e-9 times the scene diameter), dropping the covering box of
/// each collapsed segment. Total length never increases.
PolygonalCurve shorten_fixed_sequence(const PolygonalCurve& curve, const BoxSet& set,
                                      double tol = 1e-7);

/// Merge consecutive nodes closer than tol; removes the collapsed segment's
/// box. Endpoints are never displaced.
PolygonalCurve dedup_nodes(const PolygonalCurve& curve, double tol);

/// Dual certificate for splicing box k into the sequence at node j. The
/// bound vectors c1 <= lambda <= c2 collect the inactive-bound constraints;
/// lambda_star is the elementwise clip min(c2, max(c1, 0)). When the bound
/// interval is empty no multiplier exists at all (the norm is reported as
/// +inf), and the insertion is guaranteed to shorten the curve.
struct InsertionCertificate {
  int node_index = 0;
  int candidate_box = 0;
  Vec lambda1, lambda2;  // unit directions into and out of the node
  Vec c1, c2;            // bound vectors; -inf and +inf entries allowed
  Vec lambda_star;
  double norm = 0.0;  // ||lambda_star||, +inf when the bounds are inconsistent
  bool insert = false;

  bool bounds_consistent() const { return std::isfinite(norm); }
};

/// Runs the dual test at node j for candidate box k (which must contain
/// y_j). A bound is treated as active within 1e-7 * (1 + |bound|). Throws
/// when an adjacent segment has zero length; dedup first.
InsertionCertificate insertion_test(const PolygonalCurve& curve, int j, int k, const BoxSet& set,
                                    double active_tol = 1e-7);

/// One sequence-improvement pass: stabs every interior node, runs the
/// insertion test over the candidate boxes, and splices, per node, the
/// certificate of largest norm. Returns the new curve and whether anything
/// was inserted.
std::pair<PolygonalCurve, bool> improve_sequence(const PolygonalCurve& curve, const BoxSet& set);

struct PolygonalResult {
  std::optional<PolygonalCurve> curve;  // empty means certified infeasible
  int rounds = 0;                       // shorten/improve rounds
  int insertions = 0;                   // total boxes spliced
};

/// The full polygonal phase: shortest path through the line graph, then
/// alternating shortening and box insertion until no certificate fires.
/// Throws if the 2K + 10 round cap is exceeded.
PolygonalResult polygonal_phase(const LineGraph& graph, const BoxSet& set, const Vec& p_init,
                                const Vec& p_term);

}  // namespace boxplan
