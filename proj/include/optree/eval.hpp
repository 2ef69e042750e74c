#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "optree/fee.hpp"
#include "optree/llopt.hpp"
#include "optree/reference.hpp"

namespace optree {

// Density with a sampler, the common currency of the evaluation harness.
struct DensityModel {
  int p = 0;
  std::function<double(const double*)> pdf;
  std::function<void(std::mt19937_64&, double*)> draw;
};

DensityModel model_from(const ReferenceDensity& ref);
DensityModel model_from(HmapTree tree);
DensityModel model_from(FeeDensity density);

struct HellingerEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int m = 0;
};

// Importance-sampled Hellinger distance H(f,g) with an explicit proposal.
// The proposal must be positive wherever f*g is; a zero-weight violation
// raises DataError.
HellingerEstimate hellinger_with_proposal(const DensityModel& f, const DensityModel& g,
                                          const DensityModel& proposal, int m,
                                          std::uint64_t seed);

// Default proposal: the equal mixture of the two samplers, which keeps
// every importance weight in [0, 1].
HellingerEstimate hellinger(const DensityModel& f, const DensityModel& g, int m = 200000,
                            std::uint64_t seed = 1);

struct MethodSpec {
  enum class Kind { kExact, kDepthFirst, kNiOpt, kLlopt, kAdaptive, kFee };
  Kind kind = Kind::kLlopt;
  int h = 2;             // llopt
  double lambda = 1e-3;  // fee (fitted on top of the exact tree)

  std::string name() const;
  static MethodSpec parse(const std::string& text);  // "opt", "llopt:2", "fee:1e-3", ...
};

struct ExperimentRow {
  std::string example;
  std::string method;
  int n = 0;
  int replicates = 0;
  std::uint64_t seed = 0;
  double hellinger_mean = 0.0;
  double hellinger_sd = 0.0;
  double time_mean = 0.0;  // seconds
  double time_sd = 0.0;
  int failures = 0;
  std::vector<double> hellinger_values;
  std::vector<double> time_values;
};

// R replicate fits of one method on one reference density; per-replicate
// failures are recorded in the row rather than raised.
ExperimentRow run_experiment(const std::string& example, const MethodSpec& method, int n,
                             int replicates, std::uint64_t seed, const OptPrior& prior,
                             int hellinger_m = 200000, int jobs = 1);

// Aligned text table and CSV in the replicate-experiment layout: one row
// per sample size, one column pair per method.
std::string format_experiment_table(const std::vector<ExperimentRow>& rows);
std::string experiment_csv(const std::vector<ExperimentRow>& rows);

struct BenchCell {
  std::string method;
  int n = 0;
  int h = 0;  // 0 for non-llopt methods
  double seconds = 0.0;
  bool completed = false;
};

struct BenchReport {
  std::vector<BenchCell> cells;
  // log-log slope of exact-fit time against n over completed cells.
  std::optional<double> exact_slope;
  // time(h+1)/time(h) ratios at the largest completed n.
  std::vector<double> llopt_h_ratios;
};

BenchReport bench_scaling(const std::string& example, const std::vector<int>& n_grid,
                          const std::vector<int>& h_grid, std::uint64_t seed,
                          const OptPrior& prior, double budget_seconds,
                          bool include_depth_first = false);

std::string format_bench_table(const BenchReport& report);
std::string bench_csv(const BenchReport& report);

}  // namespace optree
