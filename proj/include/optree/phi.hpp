#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "optree/dataset.hpp"
#include "optree/geometry.hpp"
#include "optree/pcdensity.hpp"

namespace optree {

// Prior over recursive partitions: a single stopping probability applied to
// every region, uniform selection weights 1/p (implicit), and a symmetric
// two-component Dirichlet on each mass split. The n(A) <= 1 closed form
// used by the engine requires alpha[0] == alpha[1].
struct OptPrior {
  double rho0 = 0.5;
  std::array<double, 2> alpha{0.5, 0.5};
  // Cap on the total refinement level of the recursion.
  int max_depth = 30;
  int dim_cap = kDimCapDefault;
  // Early uniform closure thresholds (NI mode): close when n(A) < min_count
  // or mu(A) < min_volume. Zero disables either test.
  int min_count = 5;
  double min_volume = 0x1p-30;

  void validate() const;
};

// Evaluation result for one region: log Phi plus the posterior parameters.
struct PhiRecord {
  double log_phi = 0.0;
  double rho_post = 1.0;                            // rho(A|x)
  std::vector<double> lambda_post;                  // normalized, sums to 1
  std::vector<std::array<double, 2>> alpha_post;    // alpha^j(A) + n^j_A
  std::int64_t n = 0;
  bool closed = false;  // uniform closed form was applied
};

// Memoization table keyed by canonical region code. Insert-or-get is
// atomic; re-insertion under a key must carry an equal value.
class PhiCache {
 public:
  explicit PhiCache(std::size_t capacity = kDefaultCapacity) : capacity_(capacity) {}

  static constexpr std::size_t kDefaultCapacity = 10'000'000;

  std::optional<PhiRecord> find(const std::string& code);
  const PhiRecord& insert(const std::string& code, PhiRecord rec);

  std::size_t size() const;
  std::uint64_t hits() const { return hits_; }
  std::uint64_t misses() const { return misses_; }

  // Full dump: {code: {logphi, rho_post, lambda_post, alpha_post, n}}.
  std::string to_json() const;

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, PhiRecord> map_;
  std::uint64_t hits_ = 0, misses_ = 0;
  std::size_t capacity_;
};

enum class PhiMode {
  kCached,      // memoize by region code
  kDepthFirst,  // recompute every path (no memoization)
  kNaiveInexact // memoized + early uniform closure thresholds
};

// log D(t) = sum_i log Gamma(t_i) - log Gamma(sum_i t_i).
double log_d(const std::vector<double>& t);
double log_d2(double t0, double t1);

// Log-likelihood of `count` points distributed uniformly on `region`:
// -count * log mu(region).
double log_uniform_likelihood(const Region& region, std::int64_t count);

// The marginal-likelihood recursion. `members` indexes the samples inside
// `region`. Memoizing modes use `cache` when given and a call-local cache
// otherwise. `lookahead` >= 0 closes every region at that relative depth
// with the uniform approximation (used by LL-OPT); -1 runs to the terminal
// rules. Terminal rules in all modes: n(A) <= 1 and the depth caps.
// max_level_seen, when given, records the deepest level the recursion
// reached; a non-null deadline turns the run into a budgeted one that
// raises ResourceError when exceeded.
PhiRecord compute_phi(const Region& region, const std::vector<int>& members,
                      const SampleSet& samples, const OptPrior& prior, PhiMode mode,
                      PhiCache* cache, int lookahead = -1, int* max_level_seen = nullptr,
                      const std::chrono::steady_clock::time_point* deadline = nullptr);

// Draws a partition and its Dirichlet mass splits from the prior, truncated
// at `depth_cap` levels; the result is an exactly normalized
// piecewise-constant density on the unit cube.
HmapTree sample_prior(const OptPrior& prior, int p, std::uint64_t seed, int depth_cap);

}  // namespace optree
