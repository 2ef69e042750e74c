#include "optree/llopt.hpp"

#include <chrono>
#include <cmath>

namespace optree {

void LloptConfig::validate() const {
  prior.validate();
  if (h < 1) throw ConfigError("llopt: lookahead depth h must be >= 1");
}

Decision hmap_decide(const PhiRecord& rec) {
  if (rec.rho_post >= 0.5 || rec.lambda_post.empty()) return {true, -1};
  int best = 0;
  for (int j = 1; j < static_cast<int>(rec.lambda_post.size()); ++j)
    if (rec.lambda_post[static_cast<size_t>(j)] > rec.lambda_post[static_cast<size_t>(best)])
      best = j;
  return {false, best};
}

PhiRecord lookahead_phi(const Region& region, const std::vector<int>& members,
                        const SampleSet& samples, const OptPrior& prior, int h,
                        bool thresholds) {
  if (h < 0) throw ConfigError("lookahead_phi: h must be >= 0");
  PhiCache local;
  return compute_phi(region, members, samples, prior,
                     thresholds ? PhiMode::kNaiveInexact : PhiMode::kCached, &local, h);
}

namespace {

std::array<double, 2> posterior_theta(const PhiRecord& rec, int dim) {
  const auto& a = rec.alpha_post[static_cast<size_t>(dim)];
  const double total = a[0] + a[1];
  return {a[0] / total, a[1] / total};
}

// Terminal closure shared by both fitters: must mirror the engine's rules
// so that the committed tree stops exactly where the recursion closed.
bool terminal_leaf(const Region& region, std::int64_t n, const OptPrior& prior,
                   bool thresholds) {
  if (n <= 1 || region.level() >= prior.max_depth) return true;
  if (thresholds) {
    if (prior.min_count > 0 && n < prior.min_count) return true;
    if (prior.min_volume > 0.0 && region.volume() < prior.min_volume) return true;
  }
  for (int j = 0; j < region.dim(); ++j)
    if (region.splittable(j, prior.dim_cap)) return false;
  return true;
}

}  // namespace

HmapTree exact_hmap_fit(const SampleSet& samples, const OptPrior& prior, PhiMode mode,
                        FitStats* stats, std::size_t cache_capacity, double budget_seconds) {
  prior.validate();
  const int p = samples.dim();
  const Region root = Region::root(p);
  PhiCache cache(cache_capacity);
  int max_level = 0;
  std::chrono::steady_clock::time_point deadline_tp;
  const std::chrono::steady_clock::time_point* deadline = nullptr;
  if (budget_seconds > 0.0) {
    deadline_tp = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(budget_seconds));
    deadline = &deadline_tp;
  }
  // Depth-first mode exercises the uncached recursion, but the tree build
  // below reads child records back, so it is followed by a cached pass.
  if (mode == PhiMode::kDepthFirst)
    compute_phi(root, samples.all_indices(), samples, prior, PhiMode::kDepthFirst, nullptr,
                -1, nullptr, deadline);
  const PhiMode build_mode = mode == PhiMode::kDepthFirst ? PhiMode::kCached : mode;
  PhiRecord root_rec = compute_phi(root, samples.all_indices(), samples, prior, build_mode,
                                   &cache, -1, &max_level, deadline);
  if (stats) {
    stats->log_phi_root = root_rec.log_phi;
    stats->max_recursion_level = max_level;
    stats->cache_entries = cache.size();
    stats->frontier_expansions = 0;
  }

  const bool thresholds = mode == PhiMode::kNaiveInexact;
  HmapTree tree(p, samples.transform());
  struct Builder {
    const OptPrior& prior;
    PhiCache& cache;
    HmapTree& tree;
    bool thresholds;

    int build(const Region& region, const PhiRecord& rec, double mass) {
      Decision dec = hmap_decide(rec);
      if (rec.closed || dec.stop) return tree.add_leaf(region, mass);
      auto theta = posterior_theta(rec, dec.dim);
      int id = tree.add_split(region, dec.dim, theta);
      auto [left, right] = region.split(dec.dim, prior.dim_cap);
      int c0 = build_child(left, rec, dec.dim, 0, mass * theta[0]);
      int c1 = build_child(right, rec, dec.dim, 1, mass * theta[1]);
      tree.set_children(id, c0, c1);
      return id;
    }

    int build_child(const Region& child, const PhiRecord& parent, int dim, int side,
                    double mass) {
      // Children with n <= 1 were folded in closed form and never cached;
      // recover their counts from the parent's posterior Dirichlet.
      auto n_child = static_cast<std::int64_t>(std::llround(
          parent.alpha_post[static_cast<size_t>(dim)][static_cast<size_t>(side)] -
          prior.alpha[static_cast<size_t>(side)]));
      if (terminal_leaf(child, n_child, prior, thresholds))
        return tree.add_leaf(child, mass);
      auto rec = cache.find(child.encode());
      if (!rec)
        throw InternalError("exact_hmap_fit: region " + child.encode() + " missing from cache");
      return build(child, *rec, mass);
    }
  } builder{prior, cache, tree, thresholds};
  builder.build(root, root_rec, 1.0);
  tree.finalize();
  return tree;
}

HmapTree llopt_fit(const SampleSet& samples, const LloptConfig& config, FitStats* stats,
                   double budget_seconds) {
  config.validate();
  const int p = samples.dim();
  HmapTree tree(p, samples.transform());
  FitStats local{};
  std::chrono::steady_clock::time_point deadline_tp;
  const std::chrono::steady_clock::time_point* deadline = nullptr;
  if (budget_seconds > 0.0) {
    deadline_tp = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(budget_seconds));
    deadline = &deadline_tp;
  }
  struct Builder {
    const SampleSet& samples;
    const LloptConfig& config;
    HmapTree& tree;
    FitStats& stats;
    const std::chrono::steady_clock::time_point* deadline;

    int build(const Region& region, const std::vector<int>& members, double mass) {
      const auto n = static_cast<std::int64_t>(members.size());
      if (region.level() > stats.max_recursion_level)
        stats.max_recursion_level = region.level();
      if (terminal_leaf(region, n, config.prior, config.use_thresholds))
        return tree.add_leaf(region, mass);
      PhiCache local_cache;
      PhiRecord rec = compute_phi(
          region, members, samples, config.prior,
          config.use_thresholds ? PhiMode::kNaiveInexact : PhiMode::kCached, &local_cache,
          config.h, nullptr, deadline);
      ++stats.frontier_expansions;
      if (region.level() == 0) stats.log_phi_root = rec.log_phi;
      Decision dec = hmap_decide(rec);
      if (dec.stop) return tree.add_leaf(region, mass);

      auto counts = count_children(region, members, samples);
      auto theta = posterior_theta(rec, dec.dim);
      int id = tree.add_split(region, dec.dim, theta);
      auto [left, right] = region.split(dec.dim, config.prior.dim_cap);
      const auto& sc = counts[static_cast<size_t>(dec.dim)];
      int c0 = build(left, sc.members[0], mass * theta[0]);
      int c1 = build(right, sc.members[1], mass * theta[1]);
      tree.set_children(id, c0, c1);
      return id;
    }
  } builder{samples, config, tree, local, deadline};
  builder.build(Region::root(p), samples.all_indices(), 1.0);
  tree.finalize();
  if (stats) *stats = local;
  return tree;
}

AdaptiveResult adaptive_h_fit(const SampleSet& samples, LloptConfig config,
                              AdaptiveStopRule rule, double tau, double budget_seconds,
                              int h_max) {
  config.validate();
  if (h_max < 1) throw ConfigError("adaptive_h_fit: h_max must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  AdaptiveResult result;
  config.h = 1;
  result.tree = llopt_fit(samples, config);
  result.h_used = 1;
  for (int h = 2; h <= h_max; ++h) {
    if (rule == AdaptiveStopRule::kBudget && budget_seconds > 0.0 &&
        elapsed() >= budget_seconds) {
      result.budget_exhausted = true;
      return result;
    }
    config.h = h;
    HmapTree next = llopt_fit(samples, config);
    const bool identical = structurally_equal(result.tree, next);
    const double gain = identical ? 0.0 : hellinger_exact(result.tree, next);
    result.successive_gain.push_back(gain);
    if (rule == AdaptiveStopRule::kIdenticalPartitions && identical) {
      // The h-1 tree already equals this one; report the level that fired.
      result.h_used = h;
      return result;
    }
    if (rule == AdaptiveStopRule::kHellingerGain && gain <= tau) {
      result.tree = std::move(next);
      result.h_used = h;
      return result;
    }
    result.tree = std::move(next);
    result.h_used = h;
  }
  result.budget_exhausted = true;  // no rule fired within h_max
  return result;
}

namespace {

// Integral of sqrt(dens_b) over a dyadic box against tree b, times
// sqrt(dens_a): descends b restricted to the box.
double sqrt_product_integral(const HmapTree& b, int node, Region box, double log_dens_a) {
  const TreeNode& nb = b.nodes()[static_cast<size_t>(node)];
  if (nb.split_dim < 0) {
    // 0 * log(0) = 0: an empty cell contributes nothing either way.
    if (nb.log_dens == -std::numeric_limits<double>::infinity() ||
        log_dens_a == -std::numeric_limits<double>::infinity())
      return 0.0;
    return std::exp(0.5 * (log_dens_a + nb.log_dens) + box.log_volume());
  }
  const int d = nb.split_dim;
  if (box.code(d).len == nb.region.code(d).len) {
    // The box spans the split plane; halve it and continue on both sides.
    auto [lo, hi] = box.split(d, 64);
    return sqrt_product_integral(b, nb.child[0], lo, log_dens_a) +
           sqrt_product_integral(b, nb.child[1], hi, log_dens_a);
  }
  const int side = box.lower(d) < nb.region.mid(d) ? 0 : 1;
  return sqrt_product_integral(b, nb.child[static_cast<size_t>(side)], std::move(box),
                               log_dens_a);
}

}  // namespace

double hellinger_exact(const HmapTree& a, const HmapTree& b) {
  if (a.dim() != b.dim()) throw ConfigError("hellinger_exact: dimension mismatch");
  if (structurally_equal(a, b)) {
    bool same = true;
    auto la = a.leaves();
    auto lb = b.leaves();
    for (size_t i = 0; i < la.size() && same; ++i)
      same = a.nodes()[static_cast<size_t>(la[i])].log_dens ==
             b.nodes()[static_cast<size_t>(lb[i])].log_dens;
    if (same) return 0.0;
  }
  double acc = 0.0;
  for (int leaf : a.leaves()) {
    const TreeNode& node = a.nodes()[static_cast<size_t>(leaf)];
    acc += sqrt_product_integral(b, 0, node.region, node.log_dens);
  }
  return std::sqrt(std::max(0.0, 1.0 - acc));
}

}  // namespace optree
