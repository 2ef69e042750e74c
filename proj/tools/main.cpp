#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "optree/eval.hpp"
#include "optree/fee.hpp"
#include "optree/llopt.hpp"
#include "optree/svg_plot.hpp"

namespace {

using namespace optree;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitResource = 3;

struct CommonOpts {
  std::uint64_t seed = 1;
  bool deterministic = false;
  int jobs = 1;
};

struct PriorOpts {
  double rho0 = 0.5;
  double alpha = 0.5;
  int depth_cap = 30;
  int min_count = 5;
  double min_volume = 0x1p-30;

  OptPrior prior() const {
    OptPrior p;
    p.rho0 = rho0;
    p.alpha = {alpha, alpha};
    p.max_depth = depth_cap;
    p.min_count = min_count;
    p.min_volume = min_volume;
    return p;
  }
};

void add_prior_flags(CLI::App* cmd, PriorOpts& opts) {
  cmd->add_option("--rho0", opts.rho0, "prior stopping probability");
  cmd->add_option("--alpha", opts.alpha, "symmetric Dirichlet parameter");
  cmd->add_option("--depth-cap", opts.depth_cap, "total refinement level cap");
  cmd->add_option("--m0,--min-count", opts.min_count, "NI closure: minimum sample count");
  cmd->add_option("--v0,--min-volume", opts.min_volume, "NI closure: minimum region volume");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

// Model files are sniffed by their top-level keys.
bool is_tree_json(const std::string& text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("model file is not valid JSON");
  return j.contains("nodes");
}

void print_config(const CLI::App& cmd) {
  std::ostringstream header;
  header << "[" << cmd.get_name() << "] effective config:\n";
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->get_lnames().empty()) continue;
    std::string name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    std::string value = opt->count() || !opt->get_default_str().empty()
                            ? (opt->count() ? opt->results().front() : opt->get_default_str())
                            : "";
    header << "  " << name << " = " << value << '\n';
  }
  std::cout << header.str();
}

SampleSet load_samples(const std::string& path, char delimiter, bool unit_box) {
  CsvMatrix m = read_csv(path, delimiter);
  if (unit_box)
    return SampleSet::ingest_with_box(m.values, m.rows, m.cols,
                                      std::vector<double>(static_cast<size_t>(m.cols), 0.0),
                                      std::vector<double>(static_cast<size_t>(m.cols), 1.0));
  return SampleSet::ingest(m.values, m.rows, m.cols);
}

int cmd_fit(const std::string& input, const std::string& output, const std::string& method,
            int h_override, const std::string& stop_rule, double tau,
            const PriorOpts& prior_opts, const CommonOpts& common, char delimiter,
            bool unit_box, double budget_seconds, std::size_t max_cache,
            const std::string& posterior_dump) {
  (void)common;
  SampleSet samples = load_samples(input, delimiter, unit_box);
  OptPrior prior = prior_opts.prior();
  MethodSpec spec = MethodSpec::parse(method);
  if (h_override > 0) spec.h = h_override;

  FitStats stats;
  HmapTree tree;
  const auto t0 = std::chrono::steady_clock::now();
  switch (spec.kind) {
    case MethodSpec::Kind::kExact:
      tree = exact_hmap_fit(samples, prior, PhiMode::kCached, &stats, max_cache,
                            budget_seconds);
      break;
    case MethodSpec::Kind::kDepthFirst:
      tree = exact_hmap_fit(samples, prior, PhiMode::kDepthFirst, &stats, max_cache,
                            budget_seconds);
      break;
    case MethodSpec::Kind::kNiOpt:
      tree = exact_hmap_fit(samples, prior, PhiMode::kNaiveInexact, &stats, max_cache,
                            budget_seconds);
      break;
    case MethodSpec::Kind::kLlopt: {
      LloptConfig config;
      config.prior = prior;
      config.h = spec.h;
      tree = llopt_fit(samples, config, &stats, budget_seconds);
      break;
    }
    case MethodSpec::Kind::kAdaptive: {
      LloptConfig config;
      config.prior = prior;
      AdaptiveStopRule rule;
      if (stop_rule == "identical")
        rule = AdaptiveStopRule::kIdenticalPartitions;
      else if (stop_rule == "hellinger")
        rule = AdaptiveStopRule::kHellingerGain;
      else if (stop_rule == "budget")
        rule = AdaptiveStopRule::kBudget;
      else
        throw ConfigError("fit: unknown --stop-rule '" + stop_rule + "'");
      auto res = adaptive_h_fit(samples, config, rule, tau, budget_seconds);
      tree = std::move(res.tree);
      std::cout << "adaptive: stopped at h = " << res.h_used
                << (res.budget_exhausted ? " (budget exhausted)" : "") << '\n';
      break;
    }
    case MethodSpec::Kind::kFee:
      throw ConfigError("fit: 'fee' is not a fit method; run 'smooth' on a tree file");
  }
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  tree.save(output);
  if (!posterior_dump.empty()) {
    // Optional posterior dump for the exact engines.
    PhiCache cache(max_cache);
    compute_phi(Region::root(samples.dim()), samples.all_indices(), samples, prior,
                spec.kind == MethodSpec::Kind::kNiOpt ? PhiMode::kNaiveInexact
                                                      : PhiMode::kCached,
                &cache);
    write_file(posterior_dump, cache.to_json());
  }
  std::cout << "leaves = " << tree.leaf_count() << "\ndepth = " << tree.depth()
            << "\nlog_phi_root = ";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", stats.log_phi_root);
  std::cout << buf << "\nwall_seconds = ";
  std::snprintf(buf, sizeof buf, "%.3f", seconds);
  std::cout << buf << "\ncache_entries = " << stats.cache_entries << '\n';
  return 0;
}

int cmd_smooth(const std::string& input, const std::string& output, double lambda) {
  HmapTree tree = HmapTree::from_json(read_file(input));
  FeeFitResult fit = fee_fit(tree, lambda);
  fit.density.save(output);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", fit.density.integral());
  std::cout << "mass = " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.12g", fit.qp.objective);
  std::cout << "objective = " << buf << '\n';
  std::cout << "vertices = " << fit.density.triangulation().vertex_count()
            << "\nsimplices = " << fit.density.triangulation().simplex_count() << '\n';
  return 0;
}

DensityModel load_model(const std::string& path) {
  std::string text = read_file(path);
  if (is_tree_json(text)) return model_from(HmapTree::from_json(text));
  return model_from(FeeDensity::from_json(text));
}

int cmd_eval(const std::string& truth, const std::string& model_path, int m,
             std::uint64_t seed) {
  DensityModel truth_model;
  if (truth.rfind("ex", 0) == 0 && truth.size() == 3) {
    truth_model = model_from(reference(truth));
  } else {
    truth_model = load_model(truth);
  }
  DensityModel fitted = load_model(model_path);
  HellingerEstimate est = hellinger(truth_model, fitted, m, seed);
  char buf[96];
  std::snprintf(buf, sizeof buf, "hellinger = %.6f\nstd_error = %.6f\nm = %d\n", est.value,
                est.std_error, est.m);
  std::cout << buf;
  return 0;
}

int cmd_sample(const std::string& model_path, const std::string& output, int m,
               std::uint64_t seed) {
  std::string text = read_file(model_path);
  std::mt19937_64 rng(seed);
  std::vector<double> pts;
  int p = 0;
  if (is_tree_json(text)) {
    HmapTree tree = HmapTree::from_json(text);
    p = tree.dim();
    pts = tree.sample(rng, m);
  } else {
    FeeDensity fee = FeeDensity::from_json(text);
    p = fee.dim();
    pts = fee.sample(rng, m);
  }
  std::vector<std::string> header;
  for (int j = 1; j <= p; ++j) header.push_back("x" + std::to_string(j));
  write_csv(output, pts, m, p, header);
  std::cout << "wrote " << m << " samples to " << output << '\n';
  return 0;
}

int cmd_simulate(const std::string& example, const std::string& output, int n,
                 std::uint64_t seed) {
  ReferenceDensity ref = reference(example);
  std::mt19937_64 rng(seed);
  std::vector<double> rows(static_cast<size_t>(n) * static_cast<size_t>(ref.p));
  for (int i = 0; i < n; ++i) ref.draw(rng, rows.data() + static_cast<size_t>(i) * ref.p);
  std::vector<std::string> header;
  for (int j = 1; j <= ref.p; ++j) header.push_back("x" + std::to_string(j));
  write_csv(output, rows, n, ref.p, header);
  std::cout << "wrote " << n << " samples from " << example << " to " << output << '\n';
  return 0;
}

int cmd_bench(const std::string& example, const std::string& kind,
              const std::vector<int>& n_grid, const std::vector<int>& h_grid,
              const std::string& methods, int replicates, std::uint64_t seed,
              const PriorOpts& prior_opts, double budget, const std::string& output,
              int hellinger_m, int jobs, bool include_df) {
  OptPrior prior = prior_opts.prior();
  if (kind == "time") {
    BenchReport report =
        bench_scaling(example, n_grid, h_grid, seed, prior, budget, include_df);
    std::cout << format_bench_table(report);
    if (!output.empty()) write_file(output, bench_csv(report));
    return 0;
  }
  if (kind != "accuracy") throw ConfigError("bench: --kind must be 'time' or 'accuracy'");
  std::vector<ExperimentRow> rows;
  std::stringstream ms(methods);
  std::string token;
  std::vector<MethodSpec> specs;
  while (std::getline(ms, token, ','))
    if (!token.empty()) specs.push_back(MethodSpec::parse(token));
  if (specs.empty()) throw ConfigError("bench: no methods given");
  for (int n : n_grid)
    for (const auto& spec : specs)
      rows.push_back(
          run_experiment(example, spec, n, replicates, seed, prior, hellinger_m, jobs));
  std::cout << format_experiment_table(rows);
  if (!output.empty()) write_file(output, experiment_csv(rows));
  return 0;
}

int cmd_plot(const std::string& model_path, const std::string& output, bool fill) {
  std::string text = read_file(model_path);
  std::string svg;
  if (is_tree_json(text)) {
    HmapTree tree = HmapTree::from_json(text);
    svg = tree.dim() == 1 ? density_curve_svg(tree) : partition_svg(tree, fill);
  } else {
    FeeDensity fee = FeeDensity::from_json(text);
    svg = density_curve_svg(fee);
  }
  write_file(output, svg);
  std::cout << "wrote " << output << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optional Polya Tree density estimation toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "config file (key=value lines)");
  app.fallthrough();

  CommonOpts common;
  app.add_option("--seed", common.seed, "random seed")->capture_default_str();
  app.add_flag("--deterministic", common.deterministic,
               "require a seed and disable worker parallelism");
  app.add_option("--jobs", common.jobs, "worker threads for replicate runs")
      ->capture_default_str();

  // fit
  auto* fit = app.add_subcommand("fit", "fit a recursive-partition density to CSV samples");
  std::string fit_in, fit_out, fit_method = "llopt:2", fit_posterior;
  char fit_delim = ',';
  bool fit_unit_box = false;
  double fit_budget = 0.0;
  std::size_t fit_max_cache = PhiCache::kDefaultCapacity;
  PriorOpts fit_prior;
  fit->add_option("--in", fit_in, "input CSV")->required();
  fit->add_option("--out", fit_out, "output tree JSON")->required();
  fit->add_option("--method", fit_method,
                  "opt | df-opt | ni-opt | llopt[:h] | adaptive");
  int fit_h = 0;
  std::string fit_stop_rule = "identical";
  double fit_tau = 0.0;
  fit->add_option("--h", fit_h, "lookahead depth (overrides the method suffix)");
  fit->add_option("--stop-rule", fit_stop_rule,
                  "adaptive stop rule: identical | hellinger | budget");
  fit->add_option("--tau", fit_tau, "adaptive Hellinger gain threshold");
  add_prior_flags(fit, fit_prior);
  fit->add_option("--delimiter", fit_delim, "CSV delimiter");
  fit->add_flag("--unit-box", fit_unit_box, "assume data already lies in [0,1]^p");
  fit->add_option("--budget", fit_budget, "wall-clock budget in seconds (0 = none)");
  fit->add_option("--max-cache", fit_max_cache, "cache entry budget");
  fit->add_option("--posterior-dump", fit_posterior, "write the full posterior cache JSON");

  // smooth
  auto* smooth = app.add_subcommand("smooth", "continuous piecewise-linear smoothing");
  std::string smooth_in, smooth_out;
  double smooth_lambda = 1e-3;
  smooth->add_option("--in", smooth_in, "input tree JSON")->required();
  smooth->add_option("--out", smooth_out, "output FEE JSON")->required();
  smooth->add_option("--lambda", smooth_lambda, "smoothness weight")->capture_default_str();

  // eval
  auto* evalc = app.add_subcommand("eval", "Hellinger distance between two densities");
  std::string eval_truth, eval_model;
  int eval_m = 200000;
  evalc->add_option("--truth", eval_truth, "reference id (ex1..ex5) or model JSON")
      ->required();
  evalc->add_option("--model", eval_model, "fitted model JSON")->required();
  evalc->add_option("--m", eval_m, "importance samples")->capture_default_str();

  // sample
  auto* samplec = app.add_subcommand("sample", "draw samples from a fitted model");
  std::string sample_model, sample_out;
  int sample_m = 1000;
  samplec->add_option("--model", sample_model, "model JSON")->required();
  samplec->add_option("--out", sample_out, "output CSV")->required();
  samplec->add_option("--m", sample_m, "number of samples")->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw samples from a reference density");
  std::string sim_example = "ex1", sim_out;
  int sim_n = 1000;
  sim->add_option("--example", sim_example, "ex1..ex5")->capture_default_str();
  sim->add_option("--out", sim_out, "output CSV")->required();
  sim->add_option("--n", sim_n, "number of samples")->capture_default_str();

  // bench
  auto* bench = app.add_subcommand("bench", "timing and accuracy experiments");
  std::string bench_example = "ex1", bench_kind = "time", bench_methods = "opt,llopt:1,llopt:2",
              bench_out;
  std::vector<int> bench_n{1000}, bench_h{1, 2, 3};
  int bench_reps = 5, bench_m = 200000;
  double bench_budget = 0.0;
  bool bench_df = false;
  PriorOpts bench_prior;
  bench->add_option("--example", bench_example, "ex1..ex5")->capture_default_str();
  bench->add_option("--kind", bench_kind, "time | accuracy")->capture_default_str();
  bench->add_option("--n-grid", bench_n, "sample sizes")->delimiter(',');
  bench->add_option("--h-grid", bench_h, "lookahead depths (timing)")->delimiter(',');
  bench->add_option("--methods", bench_methods, "accuracy methods, comma separated");
  bench->add_option("--replicates", bench_reps, "replicates per cell")->capture_default_str();
  bench->add_option("--m", bench_m, "Hellinger importance samples")->capture_default_str();
  bench->add_option("--budget", bench_budget, "wall-clock budget in seconds (0 = none)");
  bench->add_flag("--df", bench_df, "include the depth-first engine in timing runs");
  bench->add_option("--out", bench_out, "output CSV");
  add_prior_flags(bench, bench_prior);

  // plot
  auto* plot = app.add_subcommand("plot", "SVG partition or density plot");
  std::string plot_in, plot_out;
  bool plot_fill = false;
  plot->add_option("--in", plot_in, "model JSON")->required();
  plot->add_option("--out", plot_out, "output SVG")->required();
  plot->add_flag("--fill", plot_fill, "grayscale fill by log density");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (common.deterministic) {
      common.jobs = 1;
      if (!app.count("--seed"))
        throw ConfigError("--deterministic requires an explicit --seed");
    }
    if (fit->parsed()) {
      print_config(*fit);
      return cmd_fit(fit_in, fit_out, fit_method, fit_h, fit_stop_rule, fit_tau, fit_prior,
                     common, fit_delim, fit_unit_box, fit_budget, fit_max_cache,
                     fit_posterior);
    }
    if (smooth->parsed()) {
      print_config(*smooth);
      return cmd_smooth(smooth_in, smooth_out, smooth_lambda);
    }
    if (evalc->parsed()) {
      print_config(*evalc);
      return cmd_eval(eval_truth, eval_model, eval_m, common.seed);
    }
    if (samplec->parsed()) {
      print_config(*samplec);
      return cmd_sample(sample_model, sample_out, sample_m, common.seed);
    }
    if (sim->parsed()) {
      print_config(*sim);
      return cmd_simulate(sim_example, sim_out, sim_n, common.seed);
    }
    if (bench->parsed()) {
      print_config(*bench);
      return cmd_bench(bench_example, bench_kind, bench_n, bench_h, bench_methods, bench_reps,
                       common.seed, bench_prior, bench_budget, bench_out, bench_m, common.jobs,
                       bench_df);
    }
    if (plot->parsed()) {
      print_config(*plot);
      return cmd_plot(plot_in, plot_out, plot_fill);
    }
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ResourceError& e) {
    std::cerr << "resource error: " << e.what() << '\n';
    return kExitResource;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
