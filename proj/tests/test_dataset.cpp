#include "optree/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "test_util.hpp"

using namespace optree;

TEST_CASE("min-max rescale maps the empirical range onto [0,1]") {
  std::vector<double> raw{2.0, 3.0, 4.0};
  SampleSet s = SampleSet::ingest(raw, 3, 1);
  CHECK(s.transform().scale[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.transform().offset[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(s.at(0, 0) == 0.0);
  CHECK(s.at(1, 0) == doctest::Approx(0.5));
  CHECK(s.at(2, 0) == 1.0);
}

TEST_CASE("data spanning the unit interval gets the identity transform") {
  std::vector<double> raw{0.0, 0.25, 1.0};
  SampleSet s = SampleSet::ingest(raw, 3, 1);
  CHECK(s.transform().scale[0] == 1.0);
  CHECK(s.transform().offset[0] == 0.0);
}

TEST_CASE("constant column is padded instead of dividing by zero") {
  std::vector<double> raw{5.0, 5.0, 5.0, 5.0};
  SampleSet s = SampleSet::ingest(raw, 4, 1);
  CHECK(std::isfinite(s.transform().scale[0]));
  CHECK(s.at(0, 0) >= 0.0);
  CHECK(s.at(0, 0) <= 1.0);
  // Round trip back to data units.
  double u = s.at(0, 0), x;
  s.transform().to_data(&u, &x);
  CHECK(x == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("non-finite entries are rejected with row and column") {
  std::vector<double> raw{1.0, 2.0, std::nan(""), 4.0};
  CHECK_THROWS_WITH_AS(SampleSet::ingest(raw, 2, 2), doctest::Contains("row 2"), DataError);
  CHECK_THROWS_AS(SampleSet::ingest({}, 0, 1), DataError);
}

TEST_CASE("bounding-box override rejects out-of-box samples") {
  std::vector<double> raw{0.5, 1.5};
  CHECK_THROWS_AS(SampleSet::ingest_with_box(raw, 2, 1, {0.0}, {1.0}), DataError);
}

TEST_CASE("count_children tallies one pass per split") {
  // Four samples, all in the left half of dimension 1.
  std::vector<double> rows{0.1, 0.2, 0.2, 0.8, 0.3, 0.4, 0.4, 0.9};
  SampleSet s = testutil::unit_samples(rows, 2);
  auto counts = count_children(Region::root(2), s.all_indices(), s);
  CHECK(counts[0].count[0] == 4);
  CHECK(counts[0].count[1] == 0);
  CHECK(counts[1].count[0] + counts[1].count[1] == 4);
  CHECK(counts[0].members[0].size() == 4);
}

TEST_CASE("sample exactly at the midpoint counts in the right child") {
  std::vector<double> rows{0.5};
  SampleSet s = testutil::unit_samples(rows, 1);
  auto counts = count_children(Region::root(1), s.all_indices(), s);
  CHECK(counts[0].count[0] == 0);
  CHECK(counts[0].count[1] == 1);
}

TEST_CASE("member outside the region is an internal consistency error") {
  std::vector<double> rows{0.1, 0.9};
  SampleSet s = testutil::unit_samples(rows, 1);
  Region left = Region::root(1).split(0).first;
  std::vector<int> members{0, 1};  // 0.9 is not in [0, 0.5)
  CHECK_THROWS_AS(count_children(left, members, s), InternalError);
}

TEST_CASE("per-split counts always sum to the parent membership") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    int p = 1 + static_cast<int>(rng() % 3);
    SampleSet s = testutil::random_unit_samples(rng, 40, p);
    auto counts = count_children(Region::root(p), s.all_indices(), s);
    for (int j = 0; j < p; ++j) CHECK(counts[j].count[0] + counts[j].count[1] == 40);
  }
}

TEST_CASE("level-k membership sums satisfy the n*p^k bound") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 8; ++rep) {
    int p = 1 + static_cast<int>(rng() % 3);
    int n = 20 + static_cast<int>(rng() % 81);
    SampleSet s = testutil::random_unit_samples(rng, n, p);
    for (int k = 0; k <= 4; ++k) {
      auto regions = testutil::enumerate_level(k, p);
      long long total = 0;
      for (const auto& code : regions) {
        Region r = Region::decode(code);
        for (int i = 0; i < n; ++i)
          if (r.contains(s.row(i))) ++total;
      }
      long long bound = n;
      for (int i = 0; i < k; ++i) bound *= p;
      CHECK(total <= bound);
      if (k == 1) CHECK(total == bound);  // every sample in exactly one child per split
    }
  }
}

TEST_CASE("csv read/write round trip with header and comments") {
  const char* path = "test_dataset_tmp.csv";
  {
    std::ofstream out(path);
    out << "# format_version=1\n";
    out << "x1,x2\n";
    out << "0.25,0.75\n";
    out << "1,0\n";
  }
  CsvMatrix m = read_csv(path);
  CHECK(m.rows == 2);
  CHECK(m.cols == 2);
  CHECK(m.header == std::vector<std::string>{"x1", "x2"});
  CHECK(m.values[1] == 0.75);
  write_csv(path, m.values, m.rows, m.cols, m.header);
  CsvMatrix again = read_csv(path);
  CHECK(again.values == m.values);
  std::remove(path);
}

TEST_CASE("csv rejects ragged rows and non-numeric fields") {
  const char* path = "test_dataset_bad.csv";
  {
    std::ofstream out(path);
    out << "1,2\n1\n";
  }
  CHECK_THROWS_AS(read_csv(path), ParseError);
  {
    std::ofstream out(path);
    out << "1,2\n1,zz\n";
  }
  CHECK_THROWS_AS(read_csv(path), ParseError);
  std::remove(path);
}
