#include "optree/triangulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "optree/llopt.hpp"
#include "test_util.hpp"

using namespace optree;

namespace {

HmapTree single_leaf_tree(int p) {
  HmapTree t(p, Transform::identity(p));
  t.add_leaf(Region::root(p), 1.0);
  t.finalize();
  return t;
}

bool box_inside(const Region& inner, const Region& outer) {
  for (int j = 0; j < inner.dim(); ++j)
    if (inner.lower(j) < outer.lower(j) || inner.upper(j) > outer.upper(j)) return false;
  return true;
}

// Rebuilds the kd-tree over a dyadic partition given by leaf codes.
HmapTree tree_from_codes(int p, const std::vector<std::string>& leaf_codes) {
  std::vector<Region> leaves;
  for (const auto& c : leaf_codes) leaves.push_back(Region::decode(c));
  struct B {
    const std::vector<Region>& leaves;
    HmapTree& t;
    int build(const Region& r, double mass) {
      for (const auto& leaf : leaves)
        if (leaf == r) return t.add_leaf(r, mass);
      for (int d = 0; d < r.dim(); ++d) {
        auto [a, b] = r.split(d, 62);
        bool separates = true, refines = false;
        for (const auto& leaf : leaves) {
          if (!box_inside(leaf, r)) continue;
          bool ina = box_inside(leaf, a), inb = box_inside(leaf, b);
          separates = separates && (ina || inb);
          refines = true;
        }
        if (separates && refines) {
          int id = t.add_split(r, d, {0.5, 0.5});
          int c0 = build(a, mass / 2);
          int c1 = build(b, mass / 2);
          t.set_children(id, c0, c1);
          return id;
        }
      }
      throw std::runtime_error("tree_from_codes: not a tree partition at " + r.encode());
    }
  };
  HmapTree t(p, Transform::identity(p));
  B{leaves, t}.build(Region::root(p), 1.0);
  t.finalize();
  return t;
}

}  // namespace

TEST_CASE("single leaf needs no balancing") {
  HmapTree t = single_leaf_tree(2);
  HmapTree balanced = balance_partition(t);
  CHECK(balanced.leaf_count() == 1);
  CHECK(structurally_equal(t, balanced));
}

TEST_CASE("two-level T-junction forces one split on the coarse side") {
  // Left half coarse; right-bottom quarter split once more in y, so the
  // levels across the vertical face differ by two.
  HmapTree t = tree_from_codes(2, {"0|e", "1|00", "1|01", "1|1"});
  CHECK(t.leaf_count() == 4);
  HmapTree balanced = balance_partition(t);
  CHECK(balanced.leaf_count() == 5);  // exactly one extra split
  // The density is unchanged as a function.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    double x[2] = {unif(rng), unif(rng)};
    CHECK(t.eval(x) == balanced.eval(x));
  }
}

TEST_CASE("unit square triangulates into 4 center-fan triangles") {
  Triangulation tri = triangulate(single_leaf_tree(2));
  CHECK(tri.simplex_count() == 4);
  CHECK(tri.vertex_count() == 5);  // 4 corners + center
  double total = 0.0;
  for (double v : tri.volumes) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("unit interval triangulates into 2 segments") {
  Triangulation tri = triangulate(single_leaf_tree(1));
  CHECK(tri.simplex_count() == 2);
  CHECK(tri.vertex_count() == 3);
}

TEST_CASE("unit cube triangulates into 24 tetrahedra") {
  Triangulation tri = triangulate(single_leaf_tree(3));
  CHECK(tri.simplex_count() == 24);  // 6 face centers x 4 edges
  double total = 0.0;
  for (double v : tri.volumes) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("hanging node: coarse face adopts the finer subdivision") {
  // Left half against right quarters; the shared face gains a vertex, so
  // the left box fans over 5 boundary segments while each quarter fans
  // over 4.
  HmapTree t = tree_from_codes(2, {"0|e", "1|0", "1|1"});
  HmapTree balanced = balance_partition(t);
  CHECK(balanced.leaf_count() == 3);  // already graded
  Triangulation tri = triangulate(balanced);  // conformity audit runs inside
  std::vector<int> counts(3, 0);
  for (int s = 0; s < tri.simplex_count(); ++s)
    ++counts[static_cast<size_t>(tri.simplex_leaf[static_cast<size_t>(s)])];
  std::sort(counts.begin(), counts.end());
  CHECK(counts == std::vector<int>{4, 4, 5});
}

TEST_CASE("random llopt partitions triangulate conformingly in 2-D and 3-D") {
  std::mt19937_64 rng(91);
  for (int p : {2, 3}) {
    for (int rep = 0; rep < 3; ++rep) {
      SampleSet s = testutil::random_unit_samples(rng, 150, p);
      LloptConfig config;
      config.prior.max_depth = 10;
      config.h = 1;
      HmapTree t = llopt_fit(s, config);
      HmapTree balanced = balance_partition(t);
      CHECK_NOTHROW(triangulate(balanced));  // audit would throw
      CHECK(balanced.total_mass() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("simplex volume formula") {
  // Unit right triangle.
  CHECK(simplex_volume({0, 0, 1, 0, 0, 1}, 2) == doctest::Approx(0.5).epsilon(1e-15));
  // Unit p-simplex has volume 1/p!.
  CHECK(simplex_volume({0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1}, 3) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  // Segment.
  CHECK(simplex_volume({0.25, 0.75}, 1) == doctest::Approx(0.5).epsilon(1e-15));
  // Collinear points are degenerate.
  CHECK_THROWS_AS(simplex_volume({0, 0, 1, 1, 2, 2}, 2), DataError);
}

TEST_CASE("simplex integral of the linear interpolant") {
  CHECK(simplex_integral(0.5, {1, 1, 1}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(simplex_integral(0.5, {1, 2, 3}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(simplex_integral(0.5, {0, 0, 0}) == 0.0);
}

TEST_CASE("top-face volume: flat, 1-D slope, and homogeneity") {
  // Flat graph: top face equals the bottom face, mu^2 = 1/4.
  CHECK(top_face_sq({0, 0, 1, 0, 0, 1}, 2, {2, 2, 2}) ==
        doctest::Approx(0.25).epsilon(1e-13));

  // Interval [0,1] with values (0,1): the graph is a sqrt(2) segment.
  CHECK(top_face_sq({0.0, 1.0}, 1, {0.0, 1.0}) == doctest::Approx(2.0).epsilon(1e-14));

  // Scaling c scales the excess over mu^2 quadratically.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> verts{0, 0, 1, 0, 0, 1};
  std::vector<double> c{unif(rng), unif(rng), unif(rng)};
  std::vector<double> c2{3 * c[0], 3 * c[1], 3 * c[2]};
  const double mu_sq = 0.25;
  double e1 = top_face_sq(verts, 2, c) - mu_sq;
  double e2 = top_face_sq(verts, 2, c2) - mu_sq;
  CHECK(e2 == doctest::Approx(9.0 * e1).epsilon(1e-10));
}

TEST_CASE("grading refuses to exceed the depth cap") {
  HmapTree t = tree_from_codes(1, {"0", "1000", "1001", "101", "11"});
  CHECK_THROWS_AS(balance_partition(t, 2), ResourceError);
  CHECK_NOTHROW(balance_partition(t, 10));
}
