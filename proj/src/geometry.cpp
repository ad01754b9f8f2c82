#include "boxplan/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace boxplan {

Box::Box(Vec lower, Vec upper) : l_(std::move(lower)), u_(std::move(upper)) {
  if (l_.size() == 0 || l_.size() != u_.size()) {
    throw std::invalid_argument("Box: bounds must be nonempty and of equal dimension");
  }
  for (int i = 0; i < l_.size(); ++i) {
    if (!(l_[i] <= u_[i])) {
      throw std::invalid_argument("Box: lower bound exceeds upper bound");
    }
  }
}

bool Box::contains(const Vec& x) const {
  if (x.size() != l_.size()) {
    throw std::invalid_argument("Box::contains: dimension mismatch");
  }
  for (int i = 0; i < l_.size(); ++i) {
    if (x[i] < l_[i] || x[i] > u_[i]) return false;
  }
  return true;
}

std::optional<Box> box_intersection(const Box& a, const Box& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("box_intersection: dimension mismatch");
  }
  Vec l = a.lower().cwiseMax(b.lower());
  Vec u = a.upper().cwiseMin(b.upper());
  for (int i = 0; i < l.size(); ++i) {
    if (l[i] > u[i]) return std::nullopt;
  }
  return Box(std::move(l), std::move(u));
}

BoxSet::BoxSet(std::vector<Box> boxes) : boxes_(std::move(boxes)) {
  if (boxes_.empty()) {
    throw std::invalid_argument("BoxSet: at least one box required");
  }
  const int d = boxes_.front().dim();
  for (const Box& b : boxes_) {
    if (b.dim() != d) {
      throw std::invalid_argument("BoxSet: all boxes must share one dimension");
    }
  }
  order_.resize(d);
  values_.resize(d);
  for (int dimension = 0; dimension < d; ++dimension) {
    std::vector<int>& ord = order_[dimension];
    ord.resize(boxes_.size());
    for (int k = 0; k < size(); ++k) ord[k] = k;
    std::sort(ord.begin(), ord.end(), [&](int a, int b) {
      double la = boxes_[a].lower()[dimension];
      double lb = boxes_[b].lower()[dimension];
      if (la != lb) return la < lb;
      return a < b;
    });
    values_[dimension].resize(boxes_.size());
    for (int r = 0; r < size(); ++r) {
      values_[dimension][r] = boxes_[ord[r]].lower()[dimension];
    }
  }
}

std::vector<int> BoxSet::stab(const Vec& x) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("BoxSet::stab: dimension mismatch");
  }
  // Candidates in dimension t are the boxes with l[t] <= x[t]; pick the
  // dimension with the shortest candidate prefix and verify fully.
  int best_dim = 0;
  std::ptrdiff_t best_count = size() + 1;
  for (int t = 0; t < dim(); ++t) {
    auto it = std::upper_bound(values_[t].begin(), values_[t].end(), x[t]);
    std::ptrdiff_t count = it - values_[t].begin();
    if (count < best_count) {
      best_count = count;
      best_dim = t;
    }
  }
  std::vector<int> hits;
  const std::vector<int>& ord = order_[best_dim];
  for (std::ptrdiff_t r = 0; r < best_count; ++r) {
    int k = ord[r];
    if (boxes_[k].contains(x)) hits.push_back(k);
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

std::vector<IntersectionRecord> BoxSet::enumerate_intersections() const {
  // Sweep along dimension 0 in lower-bound order; a pair can only intersect
  // while the later lower bound is below the earlier upper bound.
  std::vector<IntersectionRecord> out;
  const std::vector<int>& ord = order_[0];
  const std::vector<double>& lows = values_[0];
  const int n = size();
  for (int i = 0; i < n; ++i) {
    const int a = ord[i];
    const double hi = boxes_[a].upper()[0];
    for (int j = i + 1; j < n && lows[j] <= hi; ++j) {
      const int b = ord[j];
      auto inter = box_intersection(boxes_[a], boxes_[b]);
      if (inter) {
        out.push_back(IntersectionRecord{std::min(a, b), std::max(a, b), std::move(*inter)});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const IntersectionRecord& p, const IntersectionRecord& q) {
    if (p.k != q.k) return p.k < q.k;
    return p.l < q.l;
  });
  return out;
}

double BoxSet::bounding_diameter() const {
  Vec lo = boxes_.front().lower();
  Vec hi = boxes_.front().upper();
  for (const Box& b : boxes_) {
    lo = lo.cwiseMin(b.lower());
    hi = hi.cwiseMax(b.upper());
  }
  return (hi - lo).norm();
}

}  // namespace boxplan
