#include "optree/geometry.hpp"

#include <set>

#include "doctest.h"
#include "test_util.hpp"

using namespace optree;

TEST_CASE("split of the unit square at dimension 1") {
  Region sq = Region::root(2);
  auto [left, right] = sq.split(0);
  CHECK(left.lower(0) == 0.0);
  CHECK(left.upper(0) == 0.5);
  CHECK(left.lower(1) == 0.0);
  CHECK(left.upper(1) == 1.0);
  CHECK(right.lower(0) == 0.5);
  CHECK(right.upper(0) == 1.0);
  CHECK(left.encode() == "0|e");
  CHECK(right.encode() == "1|e");
}

TEST_CASE("any split halves the volume exactly") {
  Region r = Region::decode("01|1|e");
  for (int j = 0; j < 3; ++j) {
    auto [a, b] = r.split(j);
    CHECK(a.volume() == 0.5 * r.volume());
    CHECK(b.volume() == 0.5 * r.volume());
    CHECK(a.volume() + b.volume() == r.volume());
  }
}

TEST_CASE("three-dimensional region code example") {
  // [0,1] x [.25,.5] x [.5,1]
  Region r = Region::decode("e|01|1");
  CHECK(r.lower(0) == 0.0);
  CHECK(r.upper(0) == 1.0);
  CHECK(r.lower(1) == 0.25);
  CHECK(r.upper(1) == 0.5);
  CHECK(r.lower(2) == 0.5);
  CHECK(r.upper(2) == 1.0);
  CHECK(r.level() == 3);
  CHECK(r.encode() == "e|01|1");
}

TEST_CASE("root region encodes to empty segments") {
  CHECK(Region::root(3).encode() == "e|e|e");
  CHECK(Region::root(1).encode() == "e");
}

TEST_CASE("decode accepts the UTF-8 epsilon spelling") {
  Region r = Region::decode("\xce\xb5|\xce\xb5|\xce\xb5");
  CHECK(r == Region::root(3));
}

TEST_CASE("decode two-dimensional code") {
  Region r = Region::decode("01|1");
  CHECK(r.dim() == 2);
  CHECK(r.lower(0) == 0.25);
  CHECK(r.upper(0) == 0.5);
  CHECK(r.lower(1) == 0.5);
  CHECK(r.upper(1) == 1.0);
}

TEST_CASE("malformed codes name the offending segment") {
  CHECK_THROWS_WITH_AS(Region::decode("01|1|"), doctest::Contains("segment 3"), ParseError);
  CHECK_THROWS_AS(Region::decode("01||1"), ParseError);
  CHECK_THROWS_AS(Region::decode("01|x"), ParseError);
  CHECK_THROWS_AS(Region::decode(""), ParseError);
}

TEST_CASE("round trip decode(encode) over random splits") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    Region r = Region::root(1 + static_cast<int>(rng() % 4));
    for (int s = 0; s < 12; ++s) {
      int j = static_cast<int>(rng() % static_cast<unsigned>(r.dim()));
      r = rng() & 1 ? r.split(j).second : r.split(j).first;
    }
    CHECK(Region::decode(r.encode()) == r);
  }
}

TEST_CASE("region counting formula") {
  CHECK(count_regions(0, 5) == 1);
  CHECK(count_regions(1, 2) == 4);
  CHECK(count_regions(2, 2) == 12);
  CHECK(count_regions_cumulative(2, 2) == 1 + 4 + 12);
}

TEST_CASE("region counting matches exhaustive enumeration for k<=6, p<=4") {
  for (int p = 1; p <= 4; ++p) {
    std::set<std::string> regions{Region::root(p).encode()};
    std::uint64_t cumulative = 0;
    for (int k = 0; k <= 6; ++k) {
      if (k > 0) {
        std::set<std::string> next;
        for (const auto& code : regions) {
          Region r = Region::decode(code);
          for (int j = 0; j < p; ++j) {
            auto [a, b] = r.split(j);
            next.insert(a.encode());
            next.insert(b.encode());
          }
        }
        regions = std::move(next);
      }
      CHECK(regions.size() == count_regions(k, p));
      cumulative += regions.size();
      CHECK(cumulative == count_regions_cumulative(k, p));
    }
  }
}

TEST_CASE("count_regions overflow raises an explicit error") {
  CHECK_THROWS_AS(count_regions(62, 8), ResourceError);
  CHECK_THROWS_AS(count_regions(200, 2), ResourceError);
}

TEST_CASE("children partition the parent") {
  Region r = Region::decode("10|0");
  for (int j = 0; j < 2; ++j) {
    auto [a, b] = r.split(j);
    CHECK(a.upper(j) == b.lower(j));
    CHECK(a.upper(j) == r.mid(j));
    CHECK(a.lower(j) == r.lower(j));
    CHECK(b.upper(j) == r.upper(j));
    for (int o = 0; o < 2; ++o) {
      if (o == j) continue;
      CHECK(a.lower(o) == r.lower(o));
      CHECK(a.upper(o) == r.upper(o));
      CHECK(b.lower(o) == r.lower(o));
      CHECK(b.upper(o) == r.upper(o));
    }
  }
}

TEST_CASE("membership honors the midpoint-right convention") {
  Region root1 = Region::root(1);
  auto [left, right] = root1.split(0);
  double x = 0.5;
  CHECK(!left.contains(&x));
  CHECK(right.contains(&x));
  double top = 1.0;
  CHECK(right.contains(&top));  // closed against the top of the cube
  double below = 0.499999;
  CHECK(left.contains(&below));
}

TEST_CASE("per-dimension depth cap refuses further splits") {
  Region r = Region::root(1);
  for (int i = 0; i < 5; ++i) r = r.split(0, 5).first;
  CHECK(!r.splittable(0, 5));
  CHECK_THROWS_AS(r.split(0, 5), ResourceError);
  CHECK_NOTHROW(r.split(0, 6));
}
