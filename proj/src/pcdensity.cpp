#include "optree/pcdensity.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace optree {

namespace {
constexpr double kLn2 = 0.6931471805599453094;
}

HmapTree::HmapTree(int p, Transform tf) : p_(p), tf_(std::move(tf)) {
  if (tf_.dim() != p_) throw ConfigError("HmapTree: transform dimension mismatch");
}

int HmapTree::add_leaf(const Region& r, double mass) {
  TreeNode node;
  node.region = r;
  node.mass = mass;
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

int HmapTree::add_split(const Region& r, int dim, std::array<double, 2> theta) {
  TreeNode node;
  node.region = r;
  node.split_dim = dim;
  node.theta = theta;
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

void HmapTree::set_children(int node, int c0, int c1) {
  nodes_[static_cast<size_t>(node)].child = {c0, c1};
}

void HmapTree::finalize() {
  if (nodes_.empty()) throw InternalError("HmapTree: empty tree");
  for (auto& node : nodes_) {
    if (node.split_dim < 0) {
      node.log_dens = std::log(node.mass) + node.region.level() * kLn2;
    }
  }
  finalized_ = true;
  check_integrity();
}

std::vector<int> HmapTree::leaves() const {
  std::vector<int> out;
  for (size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].split_dim < 0) out.push_back(static_cast<int>(i));
  return out;
}

int HmapTree::leaf_count() const { return static_cast<int>(leaves().size()); }

int HmapTree::depth() const {
  int d = 0;
  for (const auto& node : nodes_)
    if (node.split_dim < 0) d = std::max(d, node.region.level());
  return d;
}

int HmapTree::locate_unit(const double* u) const {
  int id = 0;
  while (nodes_[static_cast<size_t>(id)].split_dim >= 0) {
    const TreeNode& node = nodes_[static_cast<size_t>(id)];
    int side = u[node.split_dim] < node.region.mid(node.split_dim) ? 0 : 1;
    id = node.child[static_cast<size_t>(side)];
  }
  return id;
}

double HmapTree::eval_unit(const double* u) const {
  for (int j = 0; j < p_; ++j)
    if (u[j] < 0.0 || u[j] > 1.0) return 0.0;
  return std::exp(nodes_[static_cast<size_t>(locate_unit(u))].log_dens);
}

double HmapTree::eval(const double* x) const {
  std::vector<double> u(static_cast<size_t>(p_));
  tf_.to_unit(x, u.data());
  for (int j = 0; j < p_; ++j)
    if (u[static_cast<size_t>(j)] < 0.0 || u[static_cast<size_t>(j)] > 1.0) return 0.0;
  double unit_dens = std::exp(nodes_[static_cast<size_t>(locate_unit(u.data()))].log_dens);
  return unit_dens * std::exp(tf_.log_jacobian());
}

double HmapTree::eval(const std::vector<double>& x) const { return eval(x.data()); }

std::vector<double> HmapTree::sample(std::mt19937_64& rng, int m) const {
  std::vector<double> out(static_cast<size_t>(m) * static_cast<size_t>(p_));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> u(static_cast<size_t>(p_));
  for (int i = 0; i < m; ++i) {
    int id = 0;
    while (nodes_[static_cast<size_t>(id)].split_dim >= 0) {
      const TreeNode& node = nodes_[static_cast<size_t>(id)];
      int side = unif(rng) < node.theta[0] ? 0 : 1;
      id = node.child[static_cast<size_t>(side)];
    }
    const Region& r = nodes_[static_cast<size_t>(id)].region;
    for (int j = 0; j < p_; ++j) {
      double lo = r.lower(j), hi = r.upper(j);
      u[static_cast<size_t>(j)] = lo + (hi - lo) * unif(rng);
    }
    tf_.to_data(u.data(), out.data() + static_cast<size_t>(i) * p_);
  }
  return out;
}

double HmapTree::total_mass(bool check) const {
  double sum = 0.0;
  for (const auto& node : nodes_) {
    if (node.split_dim < 0) sum += node.mass;
    if (check && node.split_dim >= 0 && std::abs(node.theta[0] + node.theta[1] - 1.0) > 1e-12)
      throw InternalError("HmapTree: theta pair at " + node.region.encode() +
                          " does not sum to 1");
  }
  if (check && std::abs(sum - 1.0) > 1e-9)
    throw InternalError("HmapTree: leaf masses sum to " + std::to_string(sum));
  return sum;
}

void HmapTree::check_integrity() const {
  if (nodes_.empty()) throw InternalError("HmapTree: empty tree");
  if (!(nodes_.front().region == Region::root(p_)))
    throw InternalError("HmapTree: node 0 is not the root region");
  // Structural walk: children of every split node must be its two halves,
  // which makes the leaf set an exact dyadic cover of the root by induction.
  size_t seen = 0;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    ++seen;
    const TreeNode& node = nodes_[static_cast<size_t>(id)];
    if (node.split_dim < 0) continue;
    if (node.split_dim >= p_) throw InternalError("HmapTree: split dimension out of range");
    if (node.child[0] < 0 || node.child[1] < 0 ||
        node.child[0] >= static_cast<int>(nodes_.size()) ||
        node.child[1] >= static_cast<int>(nodes_.size()))
      throw InternalError("HmapTree: missing child at " + node.region.encode());
    auto [left, right] = node.region.split(node.split_dim, 64);
    if (!(nodes_[static_cast<size_t>(node.child[0])].region == left) ||
        !(nodes_[static_cast<size_t>(node.child[1])].region == right))
      throw InternalError("HmapTree: children of " + node.region.encode() +
                          " are not its halves");
    stack.push_back(node.child[0]);
    stack.push_back(node.child[1]);
  }
  if (seen != nodes_.size()) throw InternalError("HmapTree: unreachable nodes present");
  total_mass(true);
}

std::string HmapTree::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["p"] = p_;
  j["transform"] = {{"scale", tf_.scale}, {"offset", tf_.offset}};
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  // Depth-first preorder for a stable, human-scannable layout.
  std::vector<int> stack{0};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const TreeNode& node = nodes_[static_cast<size_t>(id)];
    nlohmann::ordered_json item;
    item["code"] = node.region.encode();
    if (node.split_dim >= 0) {
      item["kind"] = "split";
      item["dim"] = node.split_dim + 1;  // 1-based in the file format
      item["theta"] = node.theta;
      stack.push_back(node.child[1]);
      stack.push_back(node.child[0]);
    } else {
      item["kind"] = "leaf";
      item["logdens"] = node.log_dens;
    }
    nodes.push_back(std::move(item));
  }
  j["nodes"] = std::move(nodes);
  return j.dump(2);
}

HmapTree HmapTree::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("tree JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1)
      throw ParseError("tree JSON: unsupported format_version");
    int p = j.at("p").get<int>();
    Transform tf;
    tf.scale = j.at("transform").at("scale").get<std::vector<double>>();
    tf.offset = j.at("transform").at("offset").get<std::vector<double>>();
    if (tf.dim() != p || static_cast<int>(tf.offset.size()) != p)
      throw ParseError("tree JSON: transform dimension mismatch");

    struct RawNode {
      bool split = false;
      int dim = -1;
      std::array<double, 2> theta{0, 0};
      double log_dens = 0;
    };
    std::unordered_map<std::string, RawNode> raw;
    for (const auto& item : j.at("nodes")) {
      RawNode rn;
      std::string kind = item.at("kind").get<std::string>();
      if (kind == "split") {
        rn.split = true;
        rn.dim = item.at("dim").get<int>() - 1;
        auto th = item.at("theta").get<std::vector<double>>();
        if (th.size() != 2) throw ParseError("tree JSON: theta must have 2 entries");
        rn.theta = {th[0], th[1]};
        if (rn.dim < 0 || rn.dim >= p) throw ParseError("tree JSON: dim out of range");
      } else if (kind == "leaf") {
        rn.log_dens = item.at("logdens").get<double>();
      } else {
        throw ParseError("tree JSON: unknown node kind '" + kind + "'");
      }
      if (!raw.emplace(item.at("code").get<std::string>(), rn).second)
        throw ParseError("tree JSON: duplicate node code");
    }

    HmapTree tree(p, tf);
    // Rebuild recursively from the root; masses come from theta products so
    // a load/save cycle reproduces them bit for bit.
    struct Builder {
      HmapTree& tree;
      const std::unordered_map<std::string, RawNode>& raw;
      size_t used = 0;
      int build(const Region& region, double mass) {
        auto it = raw.find(region.encode());
        if (it == raw.end())
          throw ParseError("tree JSON: missing node for region " + region.encode());
        ++used;
        const RawNode& rn = it->second;
        if (!rn.split) {
          int id = tree.add_leaf(region, mass);
          tree.mutable_node(id).log_dens = rn.log_dens;
          return id;
        }
        int id = tree.add_split(region, rn.dim, rn.theta);
        auto [left, right] = region.split(rn.dim, 64);
        int c0 = build(left, mass * rn.theta[0]);
        int c1 = build(right, mass * rn.theta[1]);
        tree.set_children(id, c0, c1);
        return id;
      }
    } builder{tree, raw};
    builder.build(Region::root(p), 1.0);
    if (builder.used != raw.size()) throw ParseError("tree JSON: unreachable nodes present");
    tree.finalized_ = true;
    tree.check_integrity();
    return tree;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("tree JSON: ") + e.what());
  }
}

void HmapTree::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  out << to_json() << '\n';
  if (!out) throw DataError("write failed: " + path);
}

HmapTree HmapTree::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

namespace {

void collect_structure(const HmapTree& t, std::vector<std::string>& leaves,
                       std::vector<std::string>& splits) {
  for (const auto& node : t.nodes()) {
    if (node.split_dim < 0)
      leaves.push_back(node.region.encode());
    else
      splits.push_back(node.region.encode() + "#" + std::to_string(node.split_dim));
  }
  std::sort(leaves.begin(), leaves.end());
  std::sort(splits.begin(), splits.end());
}

}  // namespace

bool structurally_equal(const HmapTree& a, const HmapTree& b) {
  std::vector<std::string> la, sa, lb, sb;
  collect_structure(a, la, sa);
  collect_structure(b, lb, sb);
  return la == lb && sa == sb;
}

double leaf_symmetric_difference(const HmapTree& a, const HmapTree& b) {
  std::vector<std::string> la, sa, lb, sb;
  collect_structure(a, la, sa);
  collect_structure(b, lb, sb);
  size_t common = 0;
  size_t i = 0, k = 0;
  while (i < la.size() && k < lb.size()) {
    int c = la[i].compare(lb[k]);
    if (c == 0) {
      ++common;
      ++i;
      ++k;
    } else if (c < 0) {
      ++i;
    } else {
      ++k;
    }
  }
  size_t sym = la.size() + lb.size() - 2 * common;
  return static_cast<double>(sym) / static_cast<double>(std::max(la.size(), lb.size()));
}

}  // namespace optree
