#include "optree/phi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace optree {

namespace {
constexpr double kLn2 = 0.6931471805599453094;
}

void OptPrior::validate() const {
  if (!(rho0 > 0.0) || !(rho0 < 1.0))
    throw ConfigError("prior: rho0 must lie strictly inside (0,1)");
  if (!(alpha[0] > 0.0) || !(alpha[1] > 0.0))
    throw ConfigError("prior: Dirichlet parameters must be positive");
  if (max_depth < 0) throw ConfigError("prior: max_depth must be >= 0");
  if (dim_cap < 1 || dim_cap > 62) throw ConfigError("prior: dim_cap must be in [1, 62]");
  if (min_count < 0) throw ConfigError("prior: min_count must be >= 0");
  if (min_volume < 0.0 || !(std::isfinite(min_volume)))
    throw ConfigError("prior: min_volume must be finite and >= 0");
}

std::optional<PhiRecord> PhiCache::find(const std::string& code) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = map_.find(code);
  if (it == map_.end()) {
    ++misses_;
    return std::nullopt;
  }
  ++hits_;
  return it->second;
}

const PhiRecord& PhiCache::insert(const std::string& code, PhiRecord rec) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = map_.find(code);
  if (it != map_.end()) {
    // Idempotence: concurrent recomputation must agree with the stored value.
    double denom = std::max({1.0, std::abs(it->second.log_phi), std::abs(rec.log_phi)});
    if (std::abs(it->second.log_phi - rec.log_phi) > 1e-12 * denom)
      throw InternalError("phi cache: conflicting value for region " + code);
    return it->second;
  }
  if (map_.size() >= capacity_)
    throw ResourceError("phi cache exceeded " + std::to_string(capacity_) +
                        " entries; raise the cache budget or use LL-OPT/NI-OPT");
  return map_.emplace(code, std::move(rec)).first->second;
}

std::size_t PhiCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return map_.size();
}

std::string PhiCache::to_json() const {
  std::lock_guard<std::mutex> lock(mu_);
  nlohmann::json j;  // std::map backed, so keys come out sorted
  for (const auto& [code, rec] : map_) {
    nlohmann::json item;
    item["logphi"] = rec.log_phi;
    item["rho_post"] = rec.rho_post;
    item["lambda_post"] = rec.lambda_post;
    nlohmann::json alphas = nlohmann::json::array();
    for (const auto& a : rec.alpha_post) alphas.push_back(a);
    item["alpha_post"] = std::move(alphas);
    item["n"] = rec.n;
    j[code] = std::move(item);
  }
  return j.dump(2);
}

double log_d(const std::vector<double>& t) {
  if (t.empty()) throw ConfigError("log_d: empty argument");
  double sum = 0.0, acc = 0.0;
  for (double v : t) {
    if (!(v > 0.0)) throw ConfigError("log_d: arguments must be positive");
    acc += std::lgamma(v);
    sum += v;
  }
  return acc - std::lgamma(sum);
}

double log_d2(double t0, double t1) {
  if (!(t0 > 0.0) || !(t1 > 0.0)) throw ConfigError("log_d: arguments must be positive");
  return std::lgamma(t0) + std::lgamma(t1) - std::lgamma(t0 + t1);
}

double log_uniform_likelihood(const Region& region, std::int64_t count) {
  if (count < 0) throw ConfigError("log_uniform_likelihood: negative count");
  return -static_cast<double>(count) * region.log_volume();
}

namespace {

PhiRecord closed_record(const Region& region, std::int64_t n, const OptPrior& prior) {
  const int p = region.dim();
  PhiRecord rec;
  rec.log_phi = log_uniform_likelihood(region, n);
  rec.rho_post = prior.rho0;  // rho * mu(x|A) / Phi with Phi = mu(x|A)
  rec.lambda_post.assign(static_cast<size_t>(p), 1.0 / p);
  rec.alpha_post.assign(static_cast<size_t>(p), prior.alpha);
  rec.n = n;
  rec.closed = true;
  return rec;
}

struct PhiEngine {
  const SampleSet& samples;
  const OptPrior& prior;
  bool memoize;
  bool thresholds;
  int lookahead;  // -1 = unlimited
  PhiCache* cache;
  int* max_level_seen;
  const std::chrono::steady_clock::time_point* deadline = nullptr;
  std::uint32_t budget_tick = 0;

  PhiRecord run(const Region& region, const std::vector<int>& members, int rel_depth) {
    const int p = region.dim();
    const auto n = static_cast<std::int64_t>(members.size());
    const int level = region.level();
    if (max_level_seen && level > *max_level_seen) *max_level_seen = level;
    if (deadline && (++budget_tick & 0x3ffu) == 0 &&
        std::chrono::steady_clock::now() > *deadline)
      throw ResourceError("fit budget exceeded during the Phi recursion");

    bool close = n <= 1 || level >= prior.max_depth ||
                 (lookahead >= 0 && rel_depth >= lookahead);
    if (thresholds && !close) {
      if (prior.min_count > 0 && n < prior.min_count) close = true;
      if (prior.min_volume > 0.0 && region.volume() < prior.min_volume) close = true;
    }
    bool any_split = false;
    for (int j = 0; j < p && !close; ++j) any_split |= region.splittable(j, prior.dim_cap);
    if (!close && !any_split) close = true;
    if (close) return closed_record(region, n, prior);

    std::string code;
    if (memoize) {
      code = region.encode();
      if (auto hit = cache->find(code)) return std::move(*hit);
    }

    const auto counts = count_children(region, members, samples);
    const double log_prior_d = log_d2(prior.alpha[0], prior.alpha[1]);
    const double log_lambda = -std::log(static_cast<double>(p));

    PhiRecord rec;
    rec.n = n;
    rec.lambda_post.assign(static_cast<size_t>(p), 0.0);
    rec.alpha_post.assign(static_cast<size_t>(p), prior.alpha);
    std::vector<double> terms(static_cast<size_t>(p),
                              -std::numeric_limits<double>::infinity());
    for (int j = 0; j < p; ++j) {
      const auto& sc = counts[static_cast<size_t>(j)];
      rec.alpha_post[static_cast<size_t>(j)] = {prior.alpha[0] + sc.count[0],
                                                prior.alpha[1] + sc.count[1]};
      if (!region.splittable(j, prior.dim_cap)) continue;
      auto [left, right] = region.split(j, prior.dim_cap);
      const double lphi_l = run(left, sc.members[0], rel_depth + 1).log_phi;
      const double lphi_r = run(right, sc.members[1], rel_depth + 1).log_phi;
      const double log_dratio =
          log_d2(prior.alpha[0] + sc.count[0], prior.alpha[1] + sc.count[1]) - log_prior_d;
      terms[static_cast<size_t>(j)] = log_lambda + log_dratio + lphi_l + lphi_r;
    }

    double max_term = -std::numeric_limits<double>::infinity();
    for (double t : terms) max_term = std::max(max_term, t);
    double sum_exp = 0.0;
    for (double t : terms) sum_exp += std::exp(t - max_term);
    const double log_split = max_term + std::log(sum_exp);

    const double log_stop = std::log(prior.rho0) + log_uniform_likelihood(region, n);
    const double log_go = std::log1p(-prior.rho0) + log_split;
    const double hi = std::max(log_stop, log_go);
    rec.log_phi = hi + std::log(std::exp(log_stop - hi) + std::exp(log_go - hi));
    rec.rho_post = std::exp(log_stop - rec.log_phi);
    for (int j = 0; j < p; ++j)
      rec.lambda_post[static_cast<size_t>(j)] = std::exp(terms[static_cast<size_t>(j)] - log_split);

    if (memoize) return cache->insert(code, std::move(rec));
    return rec;
  }
};

}  // namespace

PhiRecord compute_phi(const Region& region, const std::vector<int>& members,
                      const SampleSet& samples, const OptPrior& prior, PhiMode mode,
                      PhiCache* cache, int lookahead, int* max_level_seen,
                      const std::chrono::steady_clock::time_point* deadline) {
  prior.validate();
  const bool memoize = mode != PhiMode::kDepthFirst;
  const bool thresholds = mode == PhiMode::kNaiveInexact;
  PhiCache local;
  if (memoize && cache == nullptr) cache = &local;
  PhiEngine engine{samples,   prior, memoize,        thresholds,
                   lookahead, cache, max_level_seen, deadline};
  return engine.run(region, members, 0);
}

namespace {

double draw_beta(std::mt19937_64& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  double x = ga(rng), y = gb(rng);
  if (x + y == 0.0) return 0.5;
  return x / (x + y);
}

}  // namespace

HmapTree sample_prior(const OptPrior& prior, int p, std::uint64_t seed, int depth_cap) {
  prior.validate();
  if (p < 1) throw ConfigError("sample_prior: dimension must be >= 1");
  if (depth_cap < 0) throw ConfigError("sample_prior: depth_cap must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  HmapTree tree(p, Transform::identity(p));

  struct Rec {
    const OptPrior& prior;
    int depth_cap;
    std::mt19937_64& rng;
    std::uniform_real_distribution<double>& unif;
    HmapTree& tree;

    int build(const Region& region, double mass) {
      std::vector<int> open;
      for (int j = 0; j < region.dim(); ++j)
        if (region.splittable(j, prior.dim_cap)) open.push_back(j);
      if (region.level() >= depth_cap || open.empty() || unif(rng) < prior.rho0)
        return tree.add_leaf(region, mass);
      int j = open[static_cast<size_t>(
          std::min<double>(unif(rng) * open.size(), open.size() - 1.0))];
      double theta = draw_beta(rng, prior.alpha[0], prior.alpha[1]);
      int id = tree.add_split(region, j, {theta, 1.0 - theta});
      auto [left, right] = region.split(j, prior.dim_cap);
      int c0 = build(left, mass * theta);
      int c1 = build(right, mass * (1.0 - theta));
      tree.set_children(id, c0, c1);
      return id;
    }
  } rec{prior, depth_cap, rng, unif, tree};
  rec.build(Region::root(p), 1.0);
  tree.finalize();
  return tree;
}

}  // namespace optree
