#pragma once

#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "optree/dataset.hpp"
#include "optree/geometry.hpp"

namespace testutil {

// All distinct regions at exactly level k, by exhaustive splitting with
// dedup through canonical codes. Independent of count_regions.
inline std::set<std::string> enumerate_level(int k, int p) {
  std::set<std::string> cur{optree::Region::root(p).encode()};
  for (int i = 0; i < k; ++i) {
    std::set<std::string> next;
    for (const auto& code : cur) {
      optree::Region r = optree::Region::decode(code);
      for (int j = 0; j < p; ++j) {
        auto [a, b] = r.split(j, 62);
        next.insert(a.encode());
        next.insert(b.encode());
      }
    }
    cur = std::move(next);
  }
  return cur;
}

inline optree::SampleSet unit_samples(const std::vector<double>& rows, int p) {
  const int n = static_cast<int>(rows.size()) / p;
  std::vector<double> lo(static_cast<size_t>(p), 0.0), hi(static_cast<size_t>(p), 1.0);
  return optree::SampleSet::ingest_with_box(rows, n, p, lo, hi);
}

inline optree::SampleSet random_unit_samples(std::mt19937_64& rng, int n, int p) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> rows(static_cast<size_t>(n) * static_cast<size_t>(p));
  for (auto& v : rows) v = unif(rng);
  return unit_samples(rows, p);
}

// Reference evaluation of the truncated-prior marginal likelihood: the
// plain recursion with uniform closure at max_level and nothing else. Kept
// deliberately naive so it cannot share a bug with the engine.
inline double oracle_log_phi(const optree::Region& region, const std::vector<int>& members,
                             const optree::SampleSet& samples, double rho0, double a0,
                             double a1, int max_level) {
  const int p = region.dim();
  const auto n = static_cast<double>(members.size());
  const double log_u = n * static_cast<double>(region.level()) * std::log(2.0);
  if (region.level() >= max_level) return log_u;

  std::vector<double> terms;
  for (int j = 0; j < p; ++j) {
    auto [left, right] = region.split(j, 62);
    std::vector<int> ml, mr;
    for (int i : members) {
      if (samples.at(i, j) < region.mid(j))
        ml.push_back(i);
      else
        mr.push_back(i);
    }
    double log_dratio = std::lgamma(a0 + ml.size()) + std::lgamma(a1 + mr.size()) -
                        std::lgamma(a0 + a1 + members.size()) -
                        (std::lgamma(a0) + std::lgamma(a1) - std::lgamma(a0 + a1));
    double t = -std::log(static_cast<double>(p)) + log_dratio +
               oracle_log_phi(left, ml, samples, rho0, a0, a1, max_level) +
               oracle_log_phi(right, mr, samples, rho0, a0, a1, max_level);
    terms.push_back(t);
  }
  double mx = log_u;
  for (double t : terms) mx = std::max(mx, t);
  double acc = rho0 * std::exp(log_u - mx);
  for (double t : terms) acc += (1.0 - rho0) * std::exp(t - mx);
  return mx + std::log(acc);
}

}  // namespace testutil
