#include "optree/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

namespace optree {

DensityModel model_from(const ReferenceDensity& ref) {
  return DensityModel{ref.p, ref.pdf, ref.draw};
}

DensityModel model_from(HmapTree tree) {
  auto shared = std::make_shared<HmapTree>(std::move(tree));
  DensityModel m;
  m.p = shared->dim();
  m.pdf = [shared](const double* x) { return shared->eval(x); };
  m.draw = [shared](std::mt19937_64& rng, double* out) {
    auto pts = shared->sample(rng, 1);
    std::copy(pts.begin(), pts.end(), out);
  };
  return m;
}

DensityModel model_from(FeeDensity density) {
  auto shared = std::make_shared<FeeDensity>(std::move(density));
  DensityModel m;
  m.p = shared->dim();
  m.pdf = [shared](const double* x) { return shared->eval(x); };
  m.draw = [shared](std::mt19937_64& rng, double* out) {
    auto pts = shared->sample(rng, 1);
    std::copy(pts.begin(), pts.end(), out);
  };
  return m;
}

HellingerEstimate hellinger_with_proposal(const DensityModel& f, const DensityModel& g,
                                          const DensityModel& proposal, int m,
                                          std::uint64_t seed) {
  if (f.p != g.p || f.p != proposal.p)
    throw ConfigError("hellinger: dimension mismatch between densities");
  if (m < 1) throw ConfigError("hellinger: sample count must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<double> x(static_cast<size_t>(f.p));
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < m; ++i) {
    proposal.draw(rng, x.data());
    double fx = f.pdf(x.data());
    double gx = g.pdf(x.data());
    double qx = proposal.pdf(x.data());
    double prod = fx * gx;
    double w = 0.0;
    if (prod > 0.0) {
      if (!(qx > 0.0))
        throw DataError("hellinger: proposal density vanishes where f*g > 0");
      w = std::sqrt(prod) / qx;
    }
    acc += w;
    acc2 += w * w;
  }
  double mean = acc / m;
  double var = std::max(0.0, acc2 / m - mean * mean) / std::max(1, m - 1);
  double h2 = std::max(0.0, 1.0 - mean);
  HellingerEstimate est;
  est.m = m;
  est.value = std::sqrt(h2);
  // Delta method through H = sqrt(1 - mean).
  est.std_error = est.value > 1e-12 ? std::sqrt(var) / (2.0 * est.value) : std::sqrt(var);
  return est;
}

HellingerEstimate hellinger(const DensityModel& f, const DensityModel& g, int m,
                            std::uint64_t seed) {
  DensityModel mix;
  mix.p = f.p;
  mix.pdf = [f, g](const double* x) { return 0.5 * f.pdf(x) + 0.5 * g.pdf(x); };
  // Stratified halves keep the mixture weights exactly 1/2 each.
  auto flag = std::make_shared<bool>(false);
  mix.draw = [f, g, flag](std::mt19937_64& rng, double* out) {
    *flag = !*flag;
    if (*flag)
      f.draw(rng, out);
    else
      g.draw(rng, out);
  };
  return hellinger_with_proposal(f, g, mix, m, seed);
}

std::string MethodSpec::name() const {
  switch (kind) {
    case Kind::kExact:
      return "opt";
    case Kind::kDepthFirst:
      return "df-opt";
    case Kind::kNiOpt:
      return "ni-opt";
    case Kind::kLlopt:
      return "llopt(h=" + std::to_string(h) + ")";
    case Kind::kAdaptive:
      return "llopt(adaptive)";
    case Kind::kFee: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", lambda);
      return std::string("fee(lambda=") + buf + ")";
    }
  }
  return "?";
}

MethodSpec MethodSpec::parse(const std::string& text) {
  MethodSpec spec;
  std::string head = text, arg;
  if (auto pos = text.find(':'); pos != std::string::npos) {
    head = text.substr(0, pos);
    arg = text.substr(pos + 1);
  }
  if (head == "opt" || head == "exact") {
    spec.kind = Kind::kExact;
  } else if (head == "df-opt" || head == "dfopt") {
    spec.kind = Kind::kDepthFirst;
  } else if (head == "ni-opt" || head == "niopt") {
    spec.kind = Kind::kNiOpt;
  } else if (head == "llopt") {
    spec.kind = Kind::kLlopt;
    if (!arg.empty()) spec.h = std::stoi(arg);
  } else if (head == "adaptive") {
    spec.kind = Kind::kAdaptive;
  } else if (head == "fee") {
    spec.kind = Kind::kFee;
    if (!arg.empty()) spec.lambda = std::stod(arg);
  } else {
    throw ConfigError("unknown method '" + text +
                      "' (expected opt, df-opt, ni-opt, llopt[:h], adaptive, fee[:lambda])");
  }
  return spec;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

struct ReplicateOutcome {
  double hellinger = 0.0;
  double seconds = 0.0;
  bool failed = false;
};

ReplicateOutcome run_replicate(const ReferenceDensity& ref, const MethodSpec& method, int n,
                               std::uint64_t seed, const OptPrior& prior, int hellinger_m) {
  ReplicateOutcome out;
  try {
    std::mt19937_64 rng(seed);
    std::vector<double> rows(static_cast<size_t>(n) * static_cast<size_t>(ref.p));
    for (int i = 0; i < n; ++i) ref.draw(rng, rows.data() + static_cast<size_t>(i) * ref.p);
    SampleSet samples = SampleSet::ingest_with_box(
        rows, n, ref.p, std::vector<double>(static_cast<size_t>(ref.p), 0.0),
        std::vector<double>(static_cast<size_t>(ref.p), 1.0));

    const auto t0 = std::chrono::steady_clock::now();
    DensityModel fitted;
    switch (method.kind) {
      case MethodSpec::Kind::kExact:
        fitted = model_from(exact_hmap_fit(samples, prior, PhiMode::kCached));
        break;
      case MethodSpec::Kind::kDepthFirst:
        fitted = model_from(exact_hmap_fit(samples, prior, PhiMode::kDepthFirst));
        break;
      case MethodSpec::Kind::kNiOpt:
        fitted = model_from(exact_hmap_fit(samples, prior, PhiMode::kNaiveInexact));
        break;
      case MethodSpec::Kind::kLlopt: {
        LloptConfig config;
        config.prior = prior;
        config.h = method.h;
        fitted = model_from(llopt_fit(samples, config));
        break;
      }
      case MethodSpec::Kind::kAdaptive: {
        LloptConfig config;
        config.prior = prior;
        auto res = adaptive_h_fit(samples, config, AdaptiveStopRule::kIdenticalPartitions);
        fitted = model_from(std::move(res.tree));
        break;
      }
      case MethodSpec::Kind::kFee: {
        HmapTree tree = exact_hmap_fit(samples, prior, PhiMode::kCached);
        fitted = model_from(fee_fit(tree, method.lambda).density);
        break;
      }
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.hellinger = hellinger(model_from(ref), fitted, hellinger_m, mix_seed(seed, 7)).value;
  } catch (const std::exception&) {
    out.failed = true;
  }
  return out;
}

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  sd = std::sqrt(acc / (static_cast<double>(v.size()) - 1.0));
}

}  // namespace

ExperimentRow run_experiment(const std::string& example, const MethodSpec& method, int n,
                             int replicates, std::uint64_t seed, const OptPrior& prior,
                             int hellinger_m, int jobs) {
  if (replicates < 1) throw ConfigError("run_experiment: replicates must be >= 1");
  ReferenceDensity ref = reference(example);
  ExperimentRow row;
  row.example = example;
  row.method = method.name();
  row.n = n;
  row.replicates = replicates;
  row.seed = seed;

  std::vector<ReplicateOutcome> outcomes(static_cast<size_t>(replicates));
  auto work = [&](int r) {
    outcomes[static_cast<size_t>(r)] =
        run_replicate(ref, method, n, mix_seed(seed, static_cast<std::uint64_t>(r)), prior,
                      hellinger_m);
  };
  if (jobs <= 1) {
    for (int r = 0; r < replicates; ++r) work(r);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < std::min(jobs, replicates); ++t)
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < replicates; r = next.fetch_add(1)) work(r);
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& o : outcomes) {
    if (o.failed) {
      ++row.failures;
      continue;
    }
    row.hellinger_values.push_back(o.hellinger);
    row.time_values.push_back(o.seconds);
  }
  mean_sd(row.hellinger_values, row.hellinger_mean, row.hellinger_sd);
  mean_sd(row.time_values, row.time_mean, row.time_sd);
  return row;
}

std::string format_experiment_table(const std::vector<ExperimentRow>& rows) {
  // Columns: methods in first-appearance order; lines: sample sizes.
  std::vector<std::string> methods;
  std::vector<int> sizes;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
    if (std::find(sizes.begin(), sizes.end(), r.n) == sizes.end()) sizes.push_back(r.n);
  }
  std::sort(sizes.begin(), sizes.end());
  std::map<std::pair<int, std::string>, const ExperimentRow*> cell;
  for (const auto& r : rows) cell[{r.n, r.method}] = &r;

  std::ostringstream out;
  char buf[64];
  out << "n";
  for (const auto& m : methods) {
    std::snprintf(buf, sizeof buf, "  %20s", m.c_str());
    out << buf;
  }
  out << '\n';
  for (int n : sizes) {
    std::snprintf(buf, sizeof buf, "%-8d", n);
    out << buf;
    for (const auto& m : methods) {
      auto it = cell.find({n, m});
      if (it == cell.end()) {
        std::snprintf(buf, sizeof buf, "  %20s", "*");
      } else {
        char val[48];
        std::snprintf(val, sizeof val, "%.4f (%.4f)", it->second->hellinger_mean,
                      it->second->hellinger_sd);
        std::snprintf(buf, sizeof buf, "  %20s", val);
      }
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string experiment_csv(const std::vector<ExperimentRow>& rows) {
  std::ostringstream out;
  out << "# format_version=1\n";
  out << "example,method,n,replicates,seed,hellinger_mean,hellinger_sd,time_mean_s,"
         "time_sd_s,failures\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%d,%llu,%.17g,%.17g,%.17g,%.17g,%d\n",
                  r.example.c_str(), r.method.c_str(), r.n, r.replicates,
                  static_cast<unsigned long long>(r.seed), r.hellinger_mean, r.hellinger_sd,
                  r.time_mean, r.time_sd, r.failures);
    out << buf;
  }
  return out.str();
}

BenchReport bench_scaling(const std::string& example, const std::vector<int>& n_grid,
                          const std::vector<int>& h_grid, std::uint64_t seed,
                          const OptPrior& prior, double budget_seconds,
                          bool include_depth_first) {
  ReferenceDensity ref = reference(example);
  BenchReport report;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  auto over_budget = [&] { return budget_seconds > 0.0 && elapsed() >= budget_seconds; };

  for (int n : n_grid) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(n)));
    std::vector<double> rows(static_cast<size_t>(n) * static_cast<size_t>(ref.p));
    for (int i = 0; i < n; ++i) ref.draw(rng, rows.data() + static_cast<size_t>(i) * ref.p);
    SampleSet samples = SampleSet::ingest_with_box(
        rows, n, ref.p, std::vector<double>(static_cast<size_t>(ref.p), 0.0),
        std::vector<double>(static_cast<size_t>(ref.p), 1.0));

    auto timed = [&](const std::string& name, int h, auto&& fn) {
      BenchCell cell{name, n, h, 0.0, false};
      if (!over_budget()) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        cell.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        cell.completed = true;
      }
      report.cells.push_back(cell);
    };

    timed("opt", 0, [&] { exact_hmap_fit(samples, prior, PhiMode::kCached); });
    if (include_depth_first)
      timed("df-opt", 0, [&] { exact_hmap_fit(samples, prior, PhiMode::kDepthFirst); });
    for (int h : h_grid)
      timed("llopt", h, [&] {
        LloptConfig config;
        config.prior = prior;
        config.h = h;
        llopt_fit(samples, config);
      });
  }

  // Fitted log-log slope for the exact method.
  std::vector<double> lx, ly;
  for (const auto& c : report.cells)
    if (c.method == "opt" && c.completed && c.seconds > 0.0) {
      lx.push_back(std::log(static_cast<double>(c.n)));
      ly.push_back(std::log(c.seconds));
    }
  if (lx.size() >= 2) {
    double mx = 0, my = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i];
      my += ly[i];
    }
    mx /= static_cast<double>(lx.size());
    my /= static_cast<double>(lx.size());
    double num = 0, den = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
      num += (lx[i] - mx) * (ly[i] - my);
      den += (lx[i] - mx) * (lx[i] - mx);
    }
    if (den > 0) report.exact_slope = num / den;
  }

  // Per-h growth at the largest n with a complete llopt sweep.
  for (auto it = n_grid.rbegin(); it != n_grid.rend(); ++it) {
    std::map<int, double> times;
    for (const auto& c : report.cells)
      if (c.method == "llopt" && c.n == *it && c.completed) times[c.h] = c.seconds;
    if (times.size() == h_grid.size() && times.size() >= 2) {
      for (auto a = times.begin(), b = std::next(times.begin()); b != times.end(); ++a, ++b)
        if (a->second > 0.0) report.llopt_h_ratios.push_back(b->second / a->second);
      break;
    }
  }
  return report;
}

std::string format_bench_table(const BenchReport& report) {
  std::vector<int> sizes;
  std::vector<std::pair<std::string, int>> columns;  // (method, h)
  for (const auto& c : report.cells) {
    if (std::find(sizes.begin(), sizes.end(), c.n) == sizes.end()) sizes.push_back(c.n);
    std::pair<std::string, int> col{c.method, c.h};
    if (std::find(columns.begin(), columns.end(), col) == columns.end())
      columns.push_back(col);
  }
  std::sort(sizes.begin(), sizes.end());
  std::map<std::tuple<int, std::string, int>, const BenchCell*> cell;
  for (const auto& c : report.cells) cell[{c.n, c.method, c.h}] = &c;

  std::ostringstream out;
  char buf[64];
  out << "n       ";
  for (const auto& [m, h] : columns) {
    std::string label = m == "llopt" ? "llopt h=" + std::to_string(h) : m;
    std::snprintf(buf, sizeof buf, "  %12s", label.c_str());
    out << buf;
  }
  out << '\n';
  for (int n : sizes) {
    std::snprintf(buf, sizeof buf, "%-8d", n);
    out << buf;
    for (const auto& [m, h] : columns) {
      auto it = cell.find({n, m, h});
      if (it == cell.end() || !it->second->completed)
        std::snprintf(buf, sizeof buf, "  %12s", "*");
      else
        std::snprintf(buf, sizeof buf, "  %12.3f", it->second->seconds);
      out << buf;
    }
    out << '\n';
  }
  if (report.exact_slope)
    out << "log-log slope (opt): " << *report.exact_slope << '\n';
  if (!report.llopt_h_ratios.empty()) {
    out << "llopt time ratios h->h+1:";
    for (double r : report.llopt_h_ratios) {
      std::snprintf(buf, sizeof buf, " %.2f", r);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string bench_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "# format_version=1\n";
  out << "method,n,h,seconds,completed\n";
  char buf[128];
  for (const auto& c : report.cells) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%.17g,%d\n", c.method.c_str(), c.n, c.h,
                  c.seconds, c.completed ? 1 : 0);
    out << buf;
  }
  return out.str();
}

}  // namespace optree
