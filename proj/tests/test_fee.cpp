#include "optree/fee.hpp"

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

HmapTree skewed_1d_tree() {
  // Three leaves with masses 0.7 / 0.2 / 0.1.
  HmapTree t(1, Transform::identity(1));
  int root = t.add_split(Region::root(1), 0, {0.7, 0.3});
  auto [l, r] = Region::root(1).split(0);
  int c0 = t.add_leaf(l, 0.7);
  int mid = t.add_split(r, 0, {2.0 / 3.0, 1.0 / 3.0});
  auto [rl, rr] = r.split(0);
  int c1 = t.add_leaf(rl, 0.2);
  int c2 = t.add_leaf(rr, 0.1);
  t.set_children(root, c0, mid);
  t.set_children(mid, c1, c2);
  t.finalize();
  return t;
}

}  // namespace

TEST_CASE("equality row of the single 1-D leaf assembly") {
  Triangulation tri = triangulate(single_leaf_tree(1));
  QpProblem qp = assemble_qp(tri, 1e-3);
  // Two segments of length 1/2: a_i = sum of mu/(p+1) over incident
  // segments -> (1/4, 1/2, 1/4) ordered by vertex id.
  REQUIRE(qp.a.size() == 3);
  std::vector<double> sorted(qp.a.data(), qp.a.data() + 3);
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(sorted[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(sorted[2] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("assembled P is symmetric positive semidefinite") {
  std::mt19937_64 rng(7);
  SampleSet s = testutil::random_unit_samples(rng, 120, 2);
  LloptConfig config;
  config.prior.max_depth = 8;
  config.h = 1;
  HmapTree t = llopt_fit(s, config);
  Triangulation tri = triangulate(balance_partition(t));
  QpProblem qp = assemble_qp(tri, 1e-3);

  Eigen::MatrixXd dense = Eigen::MatrixXd(qp.P);
  CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * dense.cwiseAbs().maxCoeff());
  // Smallest eigenvalue via shifted power iteration on (sI - P).
  const int n = qp.size();
  double smax = dense.cwiseAbs().rowwise().sum().maxCoeff();  // Gershgorin bound
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n).normalized();
  for (int it = 0; it < 400; ++it) v = ((smax * v - dense * v)).normalized();
  double lam_min = smax - v.dot(dense * v);
  CHECK(lam_min >= -1e-10 * std::max(1.0, smax));
}

TEST_CASE("zero smoothness weight with exact per-simplex match zeroes fidelity") {
  Triangulation tri = triangulate(single_leaf_tree(1));
  QpProblem qp = assemble_qp(tri, 0.0);
  // The flat c = 1 matches every simplex mass exactly.
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(qp.size());
  CHECK(qp.objective(ones) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("lambda misconfiguration") {
  Triangulation tri = triangulate(single_leaf_tree(1));
  CHECK_THROWS_AS(assemble_qp(tri, -1.0), ConfigError);
  CHECK_THROWS_AS(fee_fit(single_leaf_tree(1), -0.5), ConfigError);
}

TEST_CASE("uniform tree fits to the exactly uniform density") {
  for (int p : {1, 2}) {
    FeeFitResult fit = fee_fit(single_leaf_tree(p), 1e-3);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> x(static_cast<size_t>(p));
    for (int i = 0; i < 200; ++i) {
      for (auto& v : x) v = unif(rng);
      CHECK(fit.density.eval(x.data()) == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(fit.density.integral() == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("huge lambda flattens a single-leaf fit to the uniform density") {
  // One leaf but a skewed initial guess cannot survive lambda -> 1e9.
  FeeFitResult fit = fee_fit(skewed_1d_tree(), 1e9);
  for (double c : fit.density.coeffs()) CHECK(c == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("fee density evaluates vertices and centroids exactly") {
  FeeFitResult fit = fee_fit(skewed_1d_tree(), 1e-4);
  const auto& tri = fit.density.triangulation();
  const auto& c = fit.density.coeffs();
  for (int s = 0; s < tri.simplex_count(); ++s) {
    const int* ids = tri.simplex(s);
    // Vertex evaluation returns the coefficient itself.
    for (int i = 0; i <= tri.p; ++i) {
      double x = tri.vertex(ids[i])[0];
      bool interior_from_left = false;
      // On shared vertices either simplex must give the same value.
      double got = fit.density.eval(&x);
      CHECK(got == doctest::Approx(c[static_cast<size_t>(ids[i])]).epsilon(1e-9));
      (void)interior_from_left;
    }
    // Centroid evaluation is the mean of the vertex values.
    double ctr = 0.0, mean = 0.0;
    for (int i = 0; i <= tri.p; ++i) {
      ctr += tri.vertex(ids[i])[0];
      mean += c[static_cast<size_t>(ids[i])];
    }
    ctr /= tri.p + 1;
    mean /= tri.p + 1;
    CHECK(fit.density.eval(&ctr) == doctest::Approx(mean).epsilon(1e-9));
  }
}

TEST_CASE("continuity across shared faces in 2-D") {
  std::mt19937_64 rng(13);
  SampleSet s = testutil::random_unit_samples(rng, 150, 2);
  LloptConfig config;
  config.prior.max_depth = 8;
  config.h = 1;
  HmapTree t = llopt_fit(s, config);
  FeeFitResult fit = fee_fit(t, 1e-3);
  const auto& tri = fit.density.triangulation();
  const auto& c = fit.density.coeffs();

  // Evaluate from both sides of every interior face at random points on it.
  std::map<std::vector<int>, std::vector<int>> face_owners;
  for (int sx = 0; sx < tri.simplex_count(); ++sx) {
    const int* ids = tri.simplex(sx);
    for (int drop = 0; drop <= tri.p; ++drop) {
      std::vector<int> face;
      for (int i = 0; i <= tri.p; ++i)
        if (i != drop) face.push_back(ids[i]);
      std::sort(face.begin(), face.end());
      face_owners[face].push_back(sx);
    }
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto value_in_simplex = [&](int sx, const double* x) {
    // Direct barycentric evaluation against simplex sx.
    const int* ids = tri.simplex(sx);
    Eigen::MatrixXd edges(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        edges(j, i) = tri.vertex(ids[i + 1])[j] - tri.vertex(ids[0])[j];
    Eigen::Vector2d rhs(x[0] - tri.vertex(ids[0])[0], x[1] - tri.vertex(ids[0])[1]);
    Eigen::Vector2d b = edges.colPivHouseholderQr().solve(rhs);
    double b0 = 1.0 - b[0] - b[1];
    return b0 * c[static_cast<size_t>(ids[0])] + b[0] * c[static_cast<size_t>(ids[1])] +
           b[1] * c[static_cast<size_t>(ids[2])];
  };
  int tested = 0;
  for (const auto& [face, owners] : face_owners) {
    if (owners.size() != 2) continue;
    for (int rep = 0; rep < 4; ++rep) {
      double w = unif(rng);
      double x[2] = {
          w * tri.vertex(face[0])[0] + (1 - w) * tri.vertex(face[1])[0],
          w * tri.vertex(face[0])[1] + (1 - w) * tri.vertex(face[1])[1],
      };
      double va = value_in_simplex(owners[0], x);
      double vb = value_in_simplex(owners[1], x);
      CHECK(va == doctest::Approx(vb).epsilon(1e-9));
      ++tested;
    }
    if (tested > 2500) break;
  }
  CHECK(tested > 0);
}

TEST_CASE("objective never exceeds the lumped initial guess") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 3; ++rep) {
    SampleSet s = testutil::random_unit_samples(rng, 100, 1);
    LloptConfig config;
    config.prior.max_depth = 8;
    config.h = 2;
    HmapTree t = llopt_fit(s, config);
    FeeFitResult fit = fee_fit(t, 1e-3);
    CHECK(fit.qp.objective <= fit.lumped_objective + 1e-9);
  }
}

TEST_CASE("increasing lambda never increases the smoothness penalty") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> normal(0.35, 0.08);
  std::vector<double> rows;
  for (int i = 0; i < 400; ++i) rows.push_back(std::clamp(normal(rng), 0.0, 1.0));
  SampleSet s = testutil::unit_samples(rows, 1);
  OptPrior prior;
  prior.max_depth = 10;
  HmapTree t = exact_hmap_fit(s, prior);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {1e-5, 1e-4, 1e-3, 1e-2, 1e-1}) {
    FeeFitResult fit = fee_fit(t, lambda);
    double q = fit.density.smoothness_penalty();
    CHECK(q <= prev * (1.0 + 1e-7) + 1e-9);
    prev = q;
  }
}

TEST_CASE("fee sampling matches per-simplex masses at 3 sigma") {
  FeeFitResult fit = fee_fit(skewed_1d_tree(), 1e-4);
  const auto& tri = fit.density.triangulation();
  const auto& c = fit.density.coeffs();
  std::mt19937_64 rng(101);
  const int m = 100000;
  auto pts = fit.density.sample(rng, m);
  // Bucket by simplex through interval membership.
  std::vector<double> mass(static_cast<size_t>(tri.simplex_count()));
  double total = 0.0;
  for (int sx = 0; sx < tri.simplex_count(); ++sx) {
    const int* ids = tri.simplex(sx);
    mass[static_cast<size_t>(sx)] = tri.volumes[static_cast<size_t>(sx)] / 2.0 *
                                    (c[static_cast<size_t>(ids[0])] + c[static_cast<size_t>(ids[1])]);
    total += mass[static_cast<size_t>(sx)];
  }
  std::vector<int> count(static_cast<size_t>(tri.simplex_count()), 0);
  for (int i = 0; i < m; ++i) {
    double x = pts[static_cast<size_t>(i)];
    for (int sx = 0; sx < tri.simplex_count(); ++sx) {
      const int* ids = tri.simplex(sx);
      double lo = std::min(tri.vertex(ids[0])[0], tri.vertex(ids[1])[0]);
      double hi = std::max(tri.vertex(ids[0])[0], tri.vertex(ids[1])[0]);
      if (x >= lo && x < hi) {
        ++count[static_cast<size_t>(sx)];
        break;
      }
    }
  }
  for (int sx = 0; sx < tri.simplex_count(); ++sx) {
    double prob = mass[static_cast<size_t>(sx)] / total;
    if (prob < 1e-3) continue;
    double se = std::sqrt(prob * (1 - prob) / m);
    CHECK(std::abs(count[static_cast<size_t>(sx)] / static_cast<double>(m) - prob) <=
          3.5 * se);
  }
}

TEST_CASE("fee json round trip preserves evaluation") {
  FeeFitResult fit = fee_fit(skewed_1d_tree(), 1e-3);
  std::string text = fit.density.to_json();
  FeeDensity back = FeeDensity::from_json(text);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    double x = unif(rng);
    CHECK(fit.density.eval(&x) == back.eval(&x));
  }
  CHECK(back.to_json() == text);
  CHECK_THROWS_AS(FeeDensity::from_json("{\"format_version\": 2}"), ParseError);
  CHECK_THROWS_AS(back.fidelity_penalty(), InternalError);
}

TEST_CASE("loaded fee densities still sample and integrate") {
  FeeFitResult fit = fee_fit(skewed_1d_tree(), 1e-3);
  FeeDensity back = FeeDensity::from_json(fit.density.to_json());
  CHECK(back.integral() == doctest::Approx(1.0).epsilon(1e-8));
  std::mt19937_64 rng(7);
  auto pts = back.sample(rng, 1000);
  for (double v : pts) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}
