#include "optree/fee.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace optree {

QpProblem assemble_qp(const Triangulation& tri, double lambda) {
  if (lambda < 0.0) throw ConfigError("assemble_qp: lambda must be >= 0");
  const int p = tri.p;
  const int n = tri.vertex_count();
  QpProblem qp;
  qp.r = Eigen::VectorXd::Zero(n);
  qp.a = Eigen::VectorXd::Zero(n);
  qp.constant = 0.0;
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<double> verts(static_cast<size_t>((p + 1) * p));

  for (int s = 0; s < tri.simplex_count(); ++s) {
    const int* ids = tri.simplex(s);
    const double vol = tri.volumes[static_cast<size_t>(s)];
    const double gcoef = vol / (p + 1);
    for (int i = 0; i <= p; ++i) qp.a[ids[i]] += gcoef;

    const double w = 1.0 / (vol * vol);
    const double q_target =
        std::exp(tri.leaf_log_dens[static_cast<size_t>(tri.simplex_leaf[static_cast<size_t>(s)])]) *
        vol;
    for (int i = 0; i <= p; ++i) {
      qp.r[ids[i]] += -2.0 * w * q_target * gcoef;
      for (int k = 0; k <= p; ++k)
        trips.emplace_back(ids[i], ids[k], 2.0 * w * gcoef * gcoef);
    }
    qp.constant += w * q_target * q_target;

    if (lambda > 0.0) {
      for (int i = 0; i <= p; ++i)
        for (int j = 0; j < p; ++j)
          verts[static_cast<size_t>(i * p + j)] = tri.vertex(ids[i])[j];
      TopFaceForm form = top_face_form(verts, p);
      const double scale = form.inv_pfact / vol;
      for (const auto& row : form.minors) {
        for (int i = 0; i <= p; ++i) {
          if (row[static_cast<size_t>(i)] == 0.0) continue;
          for (int k = 0; k <= p; ++k) {
            if (row[static_cast<size_t>(k)] == 0.0) continue;
            trips.emplace_back(ids[i], ids[k],
                               2.0 * lambda * scale * scale * row[static_cast<size_t>(i)] *
                                   row[static_cast<size_t>(k)]);
          }
        }
      }
      qp.constant += lambda;  // the flat-graph floor (mu*/mu)^2 = 1
    }
  }
  qp.P.resize(n, n);
  qp.P.setFromTriplets(trips.begin(), trips.end());
  return qp;
}

FeeDensity::FeeDensity(Triangulation tri, std::vector<double> coeffs, Transform tf,
                       double lambda)
    : tri_(std::move(tri)), coeffs_(std::move(coeffs)), tf_(std::move(tf)), lambda_(lambda) {
  if (static_cast<int>(coeffs_.size()) != tri_.vertex_count())
    throw ConfigError("FeeDensity: one coefficient per vertex required");
  for (double c : coeffs_)
    if (!(c >= 0.0)) throw DataError("FeeDensity: coefficients must be nonnegative");
  build_eval_data();
}

void FeeDensity::build_eval_data() {
  const int p = tri_.p;
  if (tri_.volumes.empty()) {
    tri_.volumes.resize(static_cast<size_t>(tri_.simplex_count()));
    std::vector<double> verts(static_cast<size_t>((p + 1) * p));
    for (int s = 0; s < tri_.simplex_count(); ++s) {
      const int* ids = tri_.simplex(s);
      for (int i = 0; i <= p; ++i)
        for (int j = 0; j < p; ++j)
          verts[static_cast<size_t>(i * p + j)] = tri_.vertex(ids[i])[j];
      tri_.volumes[static_cast<size_t>(s)] = simplex_volume(verts, p);
    }
  }
  inv_edges_.resize(static_cast<size_t>(tri_.simplex_count()) * p * p);
  Eigen::MatrixXd edges(p, p);
  for (int s = 0; s < tri_.simplex_count(); ++s) {
    const int* ids = tri_.simplex(s);
    const double* a0 = tri_.vertex(ids[0]);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) edges(j, i) = tri_.vertex(ids[i + 1])[j] - a0[j];
    Eigen::MatrixXd inv = edges.inverse();
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j)
        inv_edges_[static_cast<size_t>(s) * p * p + static_cast<size_t>(i) * p + j] =
            inv(i, j);
  }
  loc_ids_.resize(static_cast<size_t>(tri_.simplex_count()));
  for (int s = 0; s < tri_.simplex_count(); ++s) loc_ids_[static_cast<size_t>(s)] = s;
  loc_nodes_.clear();
  build_loc_node(0, tri_.simplex_count(), 0);
}

int FeeDensity::build_loc_node(int begin, int end, int depth) {
  const int p = tri_.p;
  LocNode node;
  node.lo.assign(static_cast<size_t>(p), std::numeric_limits<double>::infinity());
  node.hi.assign(static_cast<size_t>(p), -std::numeric_limits<double>::infinity());
  for (int k = begin; k < end; ++k) {
    const int* ids = tri_.simplex(loc_ids_[static_cast<size_t>(k)]);
    for (int i = 0; i <= p; ++i) {
      const double* v = tri_.vertex(ids[i]);
      for (int j = 0; j < p; ++j) {
        node.lo[static_cast<size_t>(j)] = std::min(node.lo[static_cast<size_t>(j)], v[j]);
        node.hi[static_cast<size_t>(j)] = std::max(node.hi[static_cast<size_t>(j)], v[j]);
      }
    }
  }
  node.begin = begin;
  node.end = end;
  int id = static_cast<int>(loc_nodes_.size());
  loc_nodes_.push_back(node);
  if (end - begin <= 8 || depth >= 48) return id;

  // Median split on the longest axis of the centroid cloud.
  int axis = 0;
  double best_extent = -1.0;
  std::vector<double> centroid(static_cast<size_t>(end - begin));
  for (int j = 0; j < p; ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int k = begin; k < end; ++k) {
      const int* ids = tri_.simplex(loc_ids_[static_cast<size_t>(k)]);
      double ctr = 0.0;
      for (int i = 0; i <= p; ++i) ctr += tri_.vertex(ids[i])[j];
      lo = std::min(lo, ctr);
      hi = std::max(hi, ctr);
    }
    if (hi - lo > best_extent) {
      best_extent = hi - lo;
      axis = j;
    }
  }
  auto key = [&](int sid) {
    const int* ids = tri_.simplex(sid);
    double ctr = 0.0;
    for (int i = 0; i <= p; ++i) ctr += tri_.vertex(ids[i])[axis];
    return ctr;
  };
  std::sort(loc_ids_.begin() + begin, loc_ids_.begin() + end,
            [&](int lhs, int rhs) { return key(lhs) < key(rhs) || (key(lhs) == key(rhs) && lhs < rhs); });
  int mid = (begin + end) / 2;
  if (mid == begin || mid == end) return id;
  int c0 = build_loc_node(begin, mid, depth + 1);
  int c1 = build_loc_node(mid, end, depth + 1);
  loc_nodes_[static_cast<size_t>(id)].child[0] = c0;
  loc_nodes_[static_cast<size_t>(id)].child[1] = c1;
  (void)centroid;
  return id;
}

double FeeDensity::barycentric_value(int s, const double* u, double tol) const {
  const int p = tri_.p;
  const int* ids = tri_.simplex(s);
  const double* a0 = tri_.vertex(ids[0]);
  double rest = 0.0;
  double value = 0.0;
  double minb = std::numeric_limits<double>::infinity();
  for (int i = 0; i < p; ++i) {
    double b = 0.0;
    for (int j = 0; j < p; ++j)
      b += inv_edges_[static_cast<size_t>(s) * p * p + static_cast<size_t>(i) * p + j] *
           (u[j] - a0[j]);
    minb = std::min(minb, b);
    rest += b;
    value += b * coeffs_[static_cast<size_t>(ids[i + 1])];
  }
  double b0 = 1.0 - rest;
  minb = std::min(minb, b0);
  if (minb < -tol) return -1.0;
  value += b0 * coeffs_[static_cast<size_t>(ids[0])];
  return std::max(0.0, value);
}

int FeeDensity::locate(const double* u) const {
  const int p = tri_.p;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const LocNode& node = loc_nodes_[static_cast<size_t>(id)];
    bool inside = true;
    for (int j = 0; j < p && inside; ++j)
      inside = u[j] >= node.lo[static_cast<size_t>(j)] - 1e-12 &&
               u[j] <= node.hi[static_cast<size_t>(j)] + 1e-12;
    if (!inside) continue;
    if (node.child[0] >= 0) {
      stack.push_back(node.child[0]);
      stack.push_back(node.child[1]);
      continue;
    }
    for (int k = node.begin; k < node.end; ++k) {
      int s = loc_ids_[static_cast<size_t>(k)];
      if (barycentric_value(s, u, 1e-9) >= 0.0) return s;
    }
  }
  return -1;
}

double FeeDensity::eval_unit(const double* u) const {
  for (int j = 0; j < tri_.p; ++j)
    if (u[j] < 0.0 || u[j] > 1.0) return 0.0;
  int s = locate(u);
  if (s < 0) return 0.0;
  return barycentric_value(s, u, 1e-6);
}

double FeeDensity::eval(const double* x) const {
  std::vector<double> u(static_cast<size_t>(tri_.p));
  tf_.to_unit(x, u.data());
  for (int j = 0; j < tri_.p; ++j)
    if (u[static_cast<size_t>(j)] < 0.0 || u[static_cast<size_t>(j)] > 1.0) return 0.0;
  return eval_unit(u.data()) * std::exp(tf_.log_jacobian());
}

double FeeDensity::eval(const std::vector<double>& x) const { return eval(x.data()); }

std::vector<double> FeeDensity::sample(std::mt19937_64& rng, int m) const {
  const int p = tri_.p;
  // Cumulative per-simplex masses.
  std::vector<double> cum(static_cast<size_t>(tri_.simplex_count()));
  double total = 0.0;
  for (int s = 0; s < tri_.simplex_count(); ++s) {
    const int* ids = tri_.simplex(s);
    double sum = 0.0;
    for (int i = 0; i <= p; ++i) sum += coeffs_[static_cast<size_t>(ids[i])];
    total += tri_.volumes[static_cast<size_t>(s)] / (p + 1) * sum;
    cum[static_cast<size_t>(s)] = total;
  }
  if (!(total > 0.0)) throw DataError("FeeDensity::sample: zero total mass");

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out(static_cast<size_t>(m) * static_cast<size_t>(p));
  std::vector<double> bary(static_cast<size_t>(p) + 1);
  std::vector<double> u(static_cast<size_t>(p));
  for (int draw = 0; draw < m; ++draw) {
    double target = unif(rng) * total;
    int s = static_cast<int>(std::lower_bound(cum.begin(), cum.end(), target) - cum.begin());
    s = std::min(s, tri_.simplex_count() - 1);
    const int* ids = tri_.simplex(s);
    double cmax = 0.0;
    for (int i = 0; i <= p; ++i)
      cmax = std::max(cmax, coeffs_[static_cast<size_t>(ids[i])]);
    while (true) {
      // Uniform barycentric coordinates via normalized exponentials.
      double norm = 0.0;
      for (int i = 0; i <= p; ++i) {
        bary[static_cast<size_t>(i)] = -std::log(1.0 - unif(rng));
        norm += bary[static_cast<size_t>(i)];
      }
      double f = 0.0;
      for (int i = 0; i <= p; ++i) {
        bary[static_cast<size_t>(i)] /= norm;
        f += bary[static_cast<size_t>(i)] * coeffs_[static_cast<size_t>(ids[i])];
      }
      if (unif(rng) * cmax <= f) {
        for (int j = 0; j < p; ++j) {
          double coord = 0.0;
          for (int i = 0; i <= p; ++i)
            coord += bary[static_cast<size_t>(i)] * tri_.vertex(ids[i])[j];
          u[static_cast<size_t>(j)] = coord;
        }
        tf_.to_data(u.data(), out.data() + static_cast<size_t>(draw) * p);
        break;
      }
    }
  }
  return out;
}

double FeeDensity::integral() const {
  const int p = tri_.p;
  double total = 0.0;
  for (int s = 0; s < tri_.simplex_count(); ++s) {
    const int* ids = tri_.simplex(s);
    double sum = 0.0;
    for (int i = 0; i <= p; ++i) sum += coeffs_[static_cast<size_t>(ids[i])];
    total += tri_.volumes[static_cast<size_t>(s)] / (p + 1) * sum;
  }
  return total;
}

double FeeDensity::smoothness_penalty() const {
  const int p = tri_.p;
  std::vector<double> verts(static_cast<size_t>((p + 1) * p));
  std::vector<double> c(static_cast<size_t>(p) + 1);
  double acc = 0.0;
  for (int s = 0; s < tri_.simplex_count(); ++s) {
    const int* ids = tri_.simplex(s);
    for (int i = 0; i <= p; ++i) {
      c[static_cast<size_t>(i)] = coeffs_[static_cast<size_t>(ids[i])];
      for (int j = 0; j < p; ++j)
        verts[static_cast<size_t>(i * p + j)] = tri_.vertex(ids[i])[j];
    }
    double mu = tri_.volumes[static_cast<size_t>(s)];
    acc += top_face_sq(verts, p, c) / (mu * mu);
  }
  return acc;
}

double FeeDensity::fidelity_penalty() const {
  if (tri_.leaves.empty())
    throw InternalError("fidelity_penalty: leaf densities unavailable (loaded density)");
  const int p = tri_.p;
  double acc = 0.0;
  for (int s = 0; s < tri_.simplex_count(); ++s) {
    const int* ids = tri_.simplex(s);
    double sum = 0.0;
    for (int i = 0; i <= p; ++i) sum += coeffs_[static_cast<size_t>(ids[i])];
    double vol = tri_.volumes[static_cast<size_t>(s)];
    double integral_s = vol / (p + 1) * sum;
    double q_target =
        std::exp(tri_.leaf_log_dens[static_cast<size_t>(tri_.simplex_leaf[static_cast<size_t>(s)])]) *
        vol;
    acc += (integral_s - q_target) * (integral_s - q_target) / (vol * vol);
  }
  return acc;
}

std::string FeeDensity::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["p"] = tri_.p;
  j["transform"] = {{"scale", tf_.scale}, {"offset", tf_.offset}};
  nlohmann::ordered_json verts = nlohmann::ordered_json::array();
  for (int i = 0; i < tri_.vertex_count(); ++i) {
    std::vector<double> v(tri_.vertex(i), tri_.vertex(i) + tri_.p);
    verts.push_back(v);
  }
  j["vertices"] = std::move(verts);
  nlohmann::ordered_json simp = nlohmann::ordered_json::array();
  for (int s = 0; s < tri_.simplex_count(); ++s) {
    std::vector<int> ids(tri_.simplex(s), tri_.simplex(s) + tri_.p + 1);
    simp.push_back(ids);
  }
  j["simplices"] = std::move(simp);
  j["coeffs"] = coeffs_;
  j["lambda"] = lambda_;
  return j.dump(2);
}

FeeDensity FeeDensity::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("fee JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1)
      throw ParseError("fee JSON: unsupported format_version");
    Triangulation tri;
    tri.p = j.at("p").get<int>();
    Transform tf;
    tf.scale = j.at("transform").at("scale").get<std::vector<double>>();
    tf.offset = j.at("transform").at("offset").get<std::vector<double>>();
    for (const auto& v : j.at("vertices")) {
      auto row = v.get<std::vector<double>>();
      if (static_cast<int>(row.size()) != tri.p)
        throw ParseError("fee JSON: vertex dimension mismatch");
      tri.vertices.insert(tri.vertices.end(), row.begin(), row.end());
    }
    for (const auto& v : j.at("simplices")) {
      auto row = v.get<std::vector<int>>();
      if (static_cast<int>(row.size()) != tri.p + 1)
        throw ParseError("fee JSON: simplex arity mismatch");
      for (int id : row)
        if (id < 0 || id >= tri.vertex_count())
          throw ParseError("fee JSON: vertex id out of range");
      tri.simplices.insert(tri.simplices.end(), row.begin(), row.end());
      tri.simplex_leaf.push_back(0);
    }
    auto coeffs = j.at("coeffs").get<std::vector<double>>();
    double lambda = j.at("lambda").get<double>();
    return FeeDensity(std::move(tri), std::move(coeffs), std::move(tf), lambda);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("fee JSON: ") + e.what());
  }
}

void FeeDensity::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  out << to_json() << '\n';
  if (!out) throw DataError("write failed: " + path);
}

FeeDensity FeeDensity::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

FeeFitResult fee_fit(const HmapTree& tree, double lambda, double tol, int max_iter) {
  if (lambda < 0.0) throw ConfigError("fee_fit: lambda must be >= 0");
  HmapTree balanced = balance_partition(tree);
  Triangulation tri = triangulate(balanced);
  QpProblem qp = assemble_qp(tri, lambda);

  // Feasible start: lump each vertex to the average density of the leaves
  // whose simplices touch it, then rescale onto the mass constraint.
  const int n = tri.vertex_count();
  Eigen::VectorXd guess = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd touch = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < tri.simplex_count(); ++s) {
    const int* ids = tri.simplex(s);
    double dens =
        std::exp(tri.leaf_log_dens[static_cast<size_t>(tri.simplex_leaf[static_cast<size_t>(s)])]);
    for (int i = 0; i <= tri.p; ++i) {
      guess[ids[i]] += dens;
      touch[ids[i]] += 1.0;
    }
  }
  for (int i = 0; i < n; ++i) guess[i] /= std::max(1.0, touch[i]);
  double scale = qp.a.dot(guess);
  if (scale > 0.0) guess /= scale;
  double lumped_objective = qp.objective(guess);

  QpResult sol = solve_qp(qp, tol, max_iter, &guess);
  std::vector<double> coeffs(sol.c.data(), sol.c.data() + n);
  for (double& c : coeffs) c = std::max(0.0, c);
  FeeFitResult result{FeeDensity(std::move(tri), std::move(coeffs), tree.transform(), lambda),
                      sol, lumped_objective};
  return result;
}

}  // namespace optree
