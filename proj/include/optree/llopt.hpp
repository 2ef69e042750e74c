#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "optree/phi.hpp"

namespace optree {

// Limited-lookahead configuration. The number of committed levels per
// lookahead is fixed at q = 1. Thresholds reuse the prior's min_count /
// min_volume fields and are off by default so that a saturating lookahead
// reproduces the exact fit.
struct LloptConfig {
  OptPrior prior;
  int h = 2;
  bool use_thresholds = false;

  void validate() const;
};

struct Decision {
  bool stop = true;
  int dim = -1;  // valid when !stop
};

// Levelwise posterior mode: stop iff rho(A|x) >= 1/2, otherwise split the
// argmax posterior selection weight (ties to the lowest dimension).
Decision hmap_decide(const PhiRecord& rec);

// Phi with every region at relative depth h closed by the uniform
// approximation. Memoizes within the call only.
PhiRecord lookahead_phi(const Region& region, const std::vector<int>& members,
                        const SampleSet& samples, const OptPrior& prior, int h,
                        bool thresholds = false);

// Fit statistics reported by the fitting routines.
struct FitStats {
  double log_phi_root = 0.0;
  int max_recursion_level = 0;  // deepest level any Phi recursion reached
  std::size_t cache_entries = 0;
  std::int64_t frontier_expansions = 0;  // LL-OPT: lookahead calls
};

// Full recursion (cached by default; pass kDepthFirst or kNaiveInexact for
// the other engines), then hMAP decisions from the root downward. A
// positive budget bounds the wall clock; exceeding it raises ResourceError.
HmapTree exact_hmap_fit(const SampleSet& samples, const OptPrior& prior,
                        PhiMode mode = PhiMode::kCached, FitStats* stats = nullptr,
                        std::size_t cache_capacity = PhiCache::kDefaultCapacity,
                        double budget_seconds = 0.0);

// Recursive LL-OPT: h-level lookahead at each frontier node, commit the top
// decision, recurse on the committed children.
HmapTree llopt_fit(const SampleSet& samples, const LloptConfig& config,
                   FitStats* stats = nullptr, double budget_seconds = 0.0);

enum class AdaptiveStopRule {
  kIdenticalPartitions,  // two successive identical partitions
  kHellingerGain,        // Hellinger between successive fits <= tau
  kBudget                // wall-clock budget in seconds
};

struct AdaptiveResult {
  HmapTree tree;
  int h_used = 0;
  bool budget_exhausted = false;
  std::vector<double> successive_gain;  // Hellinger between consecutive fits
};

AdaptiveResult adaptive_h_fit(const SampleSet& samples, LloptConfig config,
                              AdaptiveStopRule rule, double tau = 0.0,
                              double budget_seconds = 0.0, int h_max = 16);

// Exact Hellinger distance between two piecewise-constant trees over the
// same support (computed on the common refinement, no Monte Carlo).
double hellinger_exact(const HmapTree& a, const HmapTree& b);

}  // namespace optree
