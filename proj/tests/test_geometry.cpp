#include <doctest.h>

#include <random>

#include "boxplan/geometry.hpp"

using namespace boxplan;

namespace {

Vec vec2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

Box box2(double lx, double ly, double ux, double uy) {
  return Box(vec2(lx, ly), vec2(ux, uy));
}

Box box1(double l, double u) {
  Vec lo(1), hi(1);
  lo << l;
  hi << u;
  return Box(lo, hi);
}

std::vector<Box> random_boxes(int count, int dim, std::mt19937_64& rng, double span = 10.0) {
  std::uniform_real_distribution<double> pos(0.0, span);
  std::uniform_real_distribution<double> side(0.0, 2.5);
  std::vector<Box> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    Vec lo(dim), hi(dim);
    for (int t = 0; t < dim; ++t) {
      const double c = pos(rng);
      const double s = side(rng);
      lo[t] = c - 0.5 * s;
      hi[t] = c + 0.5 * s;
    }
    out.emplace_back(lo, hi);
  }
  return out;
}

}  // namespace

TEST_CASE("box intersection basics") {
  auto a = box2(0, 0, 1, 1);
  auto b = box2(0.5, 0.5, 1.5, 1.5);
  auto inter = box_intersection(a, b);
  REQUIRE(inter.has_value());
  CHECK(inter->lower() == vec2(0.5, 0.5));
  CHECK(inter->upper() == vec2(1, 1));

  CHECK(!box_intersection(box2(0, 0, 1, 1), box2(2, 2, 3, 3)).has_value());

  // Touching faces intersect in a degenerate box.
  auto touch = box_intersection(box2(0, 0, 1, 1), box2(1, 0, 2, 1));
  REQUIRE(touch.has_value());
  CHECK(touch->lower()[0] == 1.0);
  CHECK(touch->upper()[0] == 1.0);

  CHECK_THROWS_AS((void)box_intersection(a, box1(0, 1)), std::invalid_argument);
}

TEST_CASE("1-D chain intersections") {
  BoxSet set({box1(0, 2), box1(1, 3), box1(2.5, 4)});
  auto pairs = set.enumerate_intersections();
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].k == 0);
  CHECK(pairs[0].l == 1);
  CHECK(pairs[1].k == 1);
  CHECK(pairs[1].l == 2);
}

TEST_CASE("disjoint boxes give no pairs and empty stabs") {
  BoxSet set({box2(0, 0, 1, 1), box2(2, 2, 3, 3)});
  CHECK(set.enumerate_intersections().empty());
  CHECK(set.stab(vec2(5, 5)).empty());
}

TEST_CASE("stab includes shared corners") {
  BoxSet set({box2(0, 0, 1, 1), box2(1, 1, 2, 2)});
  auto hits = set.stab(vec2(1, 1));
  REQUIRE(hits.size() == 2);
  CHECK(hits[0] == 0);
  CHECK(hits[1] == 1);
}

TEST_CASE("sweep matches all-pairs oracle on random scenes") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 4; ++trial) {
    const int dim = 1 + trial % 3;
    BoxSet set(random_boxes(200, dim, rng));
    auto fast = set.enumerate_intersections();

    std::vector<std::pair<int, int>> brute;
    for (int k = 0; k < set.size(); ++k) {
      for (int l = k + 1; l < set.size(); ++l) {
        if (box_intersection(set.box(k), set.box(l)).has_value()) brute.emplace_back(k, l);
      }
    }
    REQUIRE(fast.size() == brute.size());
    for (size_t i = 0; i < brute.size(); ++i) {
      CHECK(fast[i].k == brute[i].first);
      CHECK(fast[i].l == brute[i].second);
      auto ref = box_intersection(set.box(brute[i].first), set.box(brute[i].second));
      CHECK(fast[i].box.lower() == ref->lower());
      CHECK(fast[i].box.upper() == ref->upper());
    }
  }
}

TEST_CASE("stab matches linear scan on random points") {
  std::mt19937_64 rng(11);
  BoxSet set(random_boxes(200, 2, rng));
  std::uniform_real_distribution<double> pos(-1.0, 11.0);
  for (int i = 0; i < 100; ++i) {
    Vec x = vec2(pos(rng), pos(rng));
    std::vector<int> brute;
    for (int k = 0; k < set.size(); ++k) {
      if (set.box(k).contains(x)) brute.push_back(k);
    }
    CHECK(set.stab(x) == brute);
  }
}

TEST_CASE("box validation") {
  CHECK_THROWS_AS(Box(vec2(1, 0), vec2(0, 1)), std::invalid_argument);
  CHECK_NOTHROW(Box(vec2(1, 1), vec2(1, 2)));
  CHECK_THROWS_AS(BoxSet({}), std::invalid_argument);
}
