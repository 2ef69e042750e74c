#include "optree/triangulation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

namespace optree {

namespace {

bool touching(const Region& a, const Region& b) {
  for (int j = 0; j < a.dim(); ++j)
    if (a.upper(j) < b.lower(j) || b.upper(j) < a.lower(j)) return false;
  return true;
}

struct WNode {
  Region region;
  int dim = -1;
  std::array<double, 2> theta{0.5, 0.5};
  std::array<int, 2> child{-1, -1};
  double mass = 0.0;
};

}  // namespace

HmapTree balance_partition(const HmapTree& tree, int dim_cap) {
  const int p = tree.dim();
  std::vector<WNode> wn;
  wn.reserve(tree.nodes().size());
  for (const auto& n : tree.nodes())
    wn.push_back(WNode{n.region, n.split_dim, n.theta, n.child, n.mass});

  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<int> leaves;
    for (int i = 0; i < static_cast<int>(wn.size()); ++i)
      if (wn[static_cast<size_t>(i)].dim < 0) leaves.push_back(i);
    std::vector<int> split_at(wn.size(), -1);
    for (int a : leaves) {
      const Region& ra = wn[static_cast<size_t>(a)].region;
      for (int b : leaves) {
        if (a == b) continue;
        const Region& rb = wn[static_cast<size_t>(b)].region;
        if (!touching(ra, rb)) continue;
        for (int d = 0; d < p; ++d) {
          if (rb.code(d).len >= ra.code(d).len + 2) {
            split_at[static_cast<size_t>(a)] = d;
            break;
          }
        }
        if (split_at[static_cast<size_t>(a)] >= 0) break;
      }
    }
    for (int a : leaves) {
      int d = split_at[static_cast<size_t>(a)];
      if (d < 0) continue;
      if (!wn[static_cast<size_t>(a)].region.splittable(d, dim_cap))
        throw ResourceError("balance_partition: grading exceeds the depth cap in dimension " +
                            std::to_string(d + 1) + "; rerun with a larger cap");
      auto [left, right] = wn[static_cast<size_t>(a)].region.split(d, dim_cap);
      double half = 0.5 * wn[static_cast<size_t>(a)].mass;
      int c0 = static_cast<int>(wn.size());
      wn.push_back(WNode{left, -1, {0.5, 0.5}, {-1, -1}, half});
      wn.push_back(WNode{right, -1, {0.5, 0.5}, {-1, -1}, half});
      wn[static_cast<size_t>(a)].dim = d;
      wn[static_cast<size_t>(a)].theta = {0.5, 0.5};
      wn[static_cast<size_t>(a)].child = {c0, c0 + 1};
      changed = true;
    }
  }

  HmapTree out(p, tree.transform());
  struct Emit {
    const std::vector<WNode>& wn;
    HmapTree& out;
    int build(int i) {
      const WNode& w = wn[static_cast<size_t>(i)];
      if (w.dim < 0) return out.add_leaf(w.region, w.mass);
      int id = out.add_split(w.region, w.dim, w.theta);
      int c0 = build(w.child[0]);
      int c1 = build(w.child[1]);
      out.set_children(id, c0, c1);
      return id;
    }
  } emit{wn, out};
  emit.build(0);
  out.finalize();
  return out;
}

namespace {

// Axis-aligned dyadic box, possibly thin (lo == hi) in some dimensions.
// All coordinates are exact dyadic doubles, so bit patterns are canonical
// keys for vertices and faces.
struct FaceBox {
  std::vector<double> lo, hi;
};

std::vector<std::uint64_t> coord_key(const std::vector<double>& x) {
  std::vector<std::uint64_t> key(x.size());
  std::memcpy(key.data(), x.data(), x.size() * sizeof(double));
  return key;
}

struct TriBuilder {
  const HmapTree& tree;
  int p;
  Triangulation tri;
  std::map<std::vector<std::uint64_t>, int> vertex_ids;
  std::map<std::vector<std::uint64_t>, std::vector<std::vector<int>>> face_memo;

  int vid(const std::vector<double>& x) {
    auto [it, fresh] = vertex_ids.emplace(coord_key(x), tri.vertex_count());
    if (fresh) tri.vertices.insert(tri.vertices.end(), x.begin(), x.end());
    return it->second;
  }

  // Leaves whose closed region meets the box in its full dimension.
  void collect_sharers(int node, const FaceBox& f, std::vector<int>& out) const {
    const TreeNode& nd = tree.nodes()[static_cast<size_t>(node)];
    for (int j = 0; j < p; ++j) {
      double lo = std::max(nd.region.lower(j), f.lo[static_cast<size_t>(j)]);
      double hi = std::min(nd.region.upper(j), f.hi[static_cast<size_t>(j)]);
      if (lo > hi) return;
      if (f.lo[static_cast<size_t>(j)] < f.hi[static_cast<size_t>(j)] && !(lo < hi)) return;
    }
    if (nd.split_dim < 0) {
      out.push_back(node);
      return;
    }
    collect_sharers(nd.child[0], f, out);
    collect_sharers(nd.child[1], f, out);
  }

  std::vector<std::vector<int>> tri_face(const FaceBox& f) {
    std::vector<std::uint64_t> key = coord_key(f.lo);
    auto hk = coord_key(f.hi);
    key.insert(key.end(), hk.begin(), hk.end());
    if (auto it = face_memo.find(key); it != face_memo.end()) return it->second;

    std::vector<int> thick;
    for (int j = 0; j < p; ++j)
      if (f.lo[static_cast<size_t>(j)] < f.hi[static_cast<size_t>(j)]) thick.push_back(j);

    std::vector<std::vector<int>> result;
    if (thick.empty()) {
      result.push_back({vid(f.lo)});
      face_memo.emplace(std::move(key), result);
      return result;
    }

    // A neighbor leaf whose trace pinches the box in dimension d splits the
    // face complex at the box midpoint of d (graded partitions only ever
    // halve a shared face).
    std::vector<int> sharers;
    collect_sharers(0, f, sharers);
    int split_dim = -1;
    for (int d : thick) {
      for (int leaf : sharers) {
        const Region& r = tree.nodes()[static_cast<size_t>(leaf)].region;
        if (!(r.lower(d) <= f.lo[static_cast<size_t>(d)] &&
              r.upper(d) >= f.hi[static_cast<size_t>(d)])) {
          split_dim = d;
          break;
        }
      }
      if (split_dim >= 0) break;
    }

    if (split_dim >= 0) {
      double mid = 0.5 * (f.lo[static_cast<size_t>(split_dim)] +
                          f.hi[static_cast<size_t>(split_dim)]);
      FaceBox a = f, b = f;
      a.hi[static_cast<size_t>(split_dim)] = mid;
      b.lo[static_cast<size_t>(split_dim)] = mid;
      result = tri_face(a);
      auto more = tri_face(b);
      result.insert(result.end(), more.begin(), more.end());
    } else if (thick.size() == 1) {
      result.push_back({vid(f.lo), vid(f.hi)});
    } else {
      std::vector<double> center(static_cast<size_t>(p));
      for (int j = 0; j < p; ++j)
        center[static_cast<size_t>(j)] =
            0.5 * (f.lo[static_cast<size_t>(j)] + f.hi[static_cast<size_t>(j)]);
      int c = vid(center);
      for (int d : thick) {
        for (int side = 0; side < 2; ++side) {
          FaceBox g = f;
          double v = side == 0 ? f.lo[static_cast<size_t>(d)] : f.hi[static_cast<size_t>(d)];
          g.lo[static_cast<size_t>(d)] = v;
          g.hi[static_cast<size_t>(d)] = v;
          for (auto s : tri_face(g)) {
            s.push_back(c);
            result.push_back(std::move(s));
          }
        }
      }
    }
    face_memo.emplace(std::move(key), result);
    return result;
  }

  void run() {
    tri.p = p;
    for (const auto& node : tree.nodes()) {
      if (node.split_dim >= 0) continue;
      tri.leaves.push_back(node.region);
      tri.leaf_log_dens.push_back(node.log_dens);
    }
    for (int li = 0; li < static_cast<int>(tri.leaves.size()); ++li) {
      const Region& r = tri.leaves[static_cast<size_t>(li)];
      std::vector<double> center(static_cast<size_t>(p));
      FaceBox box;
      box.lo.resize(static_cast<size_t>(p));
      box.hi.resize(static_cast<size_t>(p));
      for (int j = 0; j < p; ++j) {
        box.lo[static_cast<size_t>(j)] = r.lower(j);
        box.hi[static_cast<size_t>(j)] = r.upper(j);
        center[static_cast<size_t>(j)] = r.mid(j);
      }
      int c = vid(center);
      for (int d = 0; d < p; ++d) {
        for (int side = 0; side < 2; ++side) {
          FaceBox g = box;
          double v = side == 0 ? box.lo[static_cast<size_t>(d)] : box.hi[static_cast<size_t>(d)];
          g.lo[static_cast<size_t>(d)] = v;
          g.hi[static_cast<size_t>(d)] = v;
          for (auto s : tri_face(g)) {
            s.push_back(c);
            std::sort(s.begin(), s.end());
            tri.simplices.insert(tri.simplices.end(), s.begin(), s.end());
            tri.simplex_leaf.push_back(li);
          }
        }
      }
    }
  }
};

}  // namespace

double simplex_volume(const std::vector<double>& verts, int p) {
  if (static_cast<int>(verts.size()) != (p + 1) * p)
    throw ConfigError("simplex_volume: expected (p+1) x p vertex block");
  Eigen::MatrixXd m(p, p);
  for (int r = 0; r < p; ++r)
    for (int j = 0; j < p; ++j)
      m(r, j) = verts[static_cast<size_t>((r + 1) * p + j)] - verts[static_cast<size_t>(j)];
  double det = p == 0 ? 1.0 : m.determinant();
  double fact = 1.0;
  for (int i = 2; i <= p; ++i) fact *= i;
  double vol = std::abs(det) / fact;
  if (!(vol > 0.0)) throw DataError("simplex_volume: degenerate simplex (zero volume)");
  return vol;
}

double simplex_integral(double volume, const std::vector<double>& c) {
  double sum = 0.0;
  for (double v : c) sum += v;
  return volume / static_cast<double>(c.size()) * sum;
}

TopFaceForm top_face_form(const std::vector<double>& verts, int p) {
  if (static_cast<int>(verts.size()) != (p + 1) * p)
    throw ConfigError("top_face_form: expected (p+1) x p vertex block");
  Eigen::MatrixXd edges(p, p);  // row r = a_{r+2} - a_1 (spatial part)
  for (int r = 0; r < p; ++r)
    for (int j = 0; j < p; ++j)
      edges(r, j) = verts[static_cast<size_t>((r + 1) * p + j)] - verts[static_cast<size_t>(j)];

  double fact = 1.0;
  for (int i = 2; i <= p; ++i) fact *= i;
  TopFaceForm form;
  form.inv_pfact = 1.0 / fact;
  double det = edges.determinant();
  if (det == 0.0) throw DataError("top_face_form: degenerate simplex");
  form.mu_sq = (det * det) / (fact * fact);
  form.minors.assign(static_cast<size_t>(p), std::vector<double>(static_cast<size_t>(p) + 1, 0.0));

  // Cauchy-Binet terms: dropping spatial column t leaves a determinant that
  // is linear in the vertex-value differences c_{r+1} - c_1; expand along
  // that column to get per-vertex coefficients.
  for (int t = 0; t < p; ++t) {
    for (int r = 0; r < p; ++r) {
      Eigen::MatrixXd minor(p - 1, p - 1);
      int mr = 0;
      for (int i = 0; i < p; ++i) {
        if (i == r) continue;
        int mc = 0;
        for (int j = 0; j < p; ++j) {
          if (j == t) continue;
          minor(mr, mc) = edges(i, j);
          ++mc;
        }
        ++mr;
      }
      double mdet = p == 1 ? 1.0 : minor.determinant();
      double sign = ((r + p - 1) % 2 == 0) ? 1.0 : -1.0;
      double coef = sign * mdet;
      form.minors[static_cast<size_t>(t)][static_cast<size_t>(r + 1)] += coef;
      form.minors[static_cast<size_t>(t)][0] -= coef;
    }
  }
  return form;
}

double top_face_sq(const std::vector<double>& verts, int p, const std::vector<double>& c) {
  if (static_cast<int>(c.size()) != p + 1)
    throw ConfigError("top_face_sq: need p+1 vertex values");
  TopFaceForm form = top_face_form(verts, p);
  double acc = form.mu_sq;
  for (const auto& row : form.minors) {
    double m = 0.0;
    for (size_t i = 0; i < row.size(); ++i) m += row[i] * c[i];
    acc += (m * form.inv_pfact) * (m * form.inv_pfact);
  }
  return acc;
}

void audit_conformity(const Triangulation& tri) {
  const int p = tri.p;
  if (tri.simplex_count() == 0) throw InternalError("triangulation: empty");
  if (static_cast<int>(tri.volumes.size()) != tri.simplex_count())
    throw InternalError("triangulation: volumes not computed");

  // Exact cover of every leaf by its member simplices.
  std::vector<double> leaf_acc(tri.leaves.size(), 0.0);
  for (int s = 0; s < tri.simplex_count(); ++s) {
    if (!(tri.volumes[static_cast<size_t>(s)] > 0.0))
      throw InternalError("triangulation: nonpositive simplex volume");
    leaf_acc[static_cast<size_t>(tri.simplex_leaf[static_cast<size_t>(s)])] +=
        tri.volumes[static_cast<size_t>(s)];
  }
  for (size_t li = 0; li < tri.leaves.size(); ++li) {
    double expect = tri.leaves[li].volume();
    if (std::abs(leaf_acc[li] - expect) > 1e-9 * expect)
      throw InternalError("triangulation: leaf " + tri.leaves[li].encode() +
                          " is not exactly covered by its simplices");
  }

  // Conformity: every (p-1)-face is shared by exactly two simplices or lies
  // on the boundary of the cube. A hanging vertex breaks this pairing.
  std::map<std::vector<int>, int> face_count;
  for (int s = 0; s < tri.simplex_count(); ++s) {
    const int* ids = tri.simplex(s);
    for (int drop = 0; drop <= p; ++drop) {
      std::vector<int> face;
      for (int i = 0; i <= p; ++i)
        if (i != drop) face.push_back(ids[i]);
      std::sort(face.begin(), face.end());
      ++face_count[face];
    }
  }
  for (const auto& [face, count] : face_count) {
    if (count == 2) continue;
    if (count > 2)
      throw InternalError("triangulation: face shared by more than two simplices");
    bool boundary = false;
    for (int d = 0; d < p && !boundary; ++d) {
      for (double v : {0.0, 1.0}) {
        bool all = true;
        for (int id : face)
          if (tri.vertex(id)[d] != v) {
            all = false;
            break;
          }
        if (all) {
          boundary = true;
          break;
        }
      }
    }
    if (!boundary)
      throw InternalError("triangulation: interior face owned by a single simplex");
  }
}

Triangulation triangulate(const HmapTree& balanced) {
  TriBuilder builder{balanced, balanced.dim(), {}, {}, {}};
  builder.run();
  Triangulation tri = std::move(builder.tri);
  tri.volumes.resize(static_cast<size_t>(tri.simplex_count()));
  std::vector<double> verts(static_cast<size_t>((tri.p + 1) * tri.p));
  for (int s = 0; s < tri.simplex_count(); ++s) {
    const int* ids = tri.simplex(s);
    for (int i = 0; i <= tri.p; ++i)
      for (int j = 0; j < tri.p; ++j)
        verts[static_cast<size_t>(i * tri.p + j)] = tri.vertex(ids[i])[j];
    tri.volumes[static_cast<size_t>(s)] = simplex_volume(verts, tri.p);
  }
  audit_conformity(tri);
  return tri;
}

}  // namespace optree
