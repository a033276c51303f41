// crf: command-line front end for composite risk functional estimation.
//
//   crf estimate       --measure m.json --law normal_var:10,3 --n 200
//   crf simulate       --measure m.json --law ... --n 200 --replications 1000 --out dir
//   crf compare        --measure a.json --law ... --measure2 b.json --law2 ...
//   crf systemic       --measure sys.json --n 200 --replications 1000
//   crf optimize       --measure ho.json --law ... --n 200 --replications 1000
//   crf check-identity --kernel uniform --bandwidth power:1,0.6 --p 2

#include "crf/crf.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

using namespace crf;

struct Options {
  std::string measure;
  std::string measure2;
  std::string law = "normal:0,1";
  std::string law2;
  long long n = 200;
  long long replications = 1000;
  std::uint64_t seed = 1;
  std::string kernel;
  std::string bandwidth;
  std::string smooth_layers;
  double level = 0.95;
  int bins = 0;
  std::string out;
  std::string format = "json";
  unsigned workers = 1;
  double p = 2.0;
  bool p_given = false;
};

std::set<int> parse_layers(const std::string& text) {
  std::set<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int j = std::stoi(item, &used);
      if (used != item.size() || j < 1) throw std::invalid_argument(item);
      out.insert(j);
    } catch (const std::exception&) {
      throw ConfigError("--smooth-layers expects a comma list of positive integers, got '" + text + "'");
    }
  }
  if (out.empty()) throw ConfigError("--smooth-layers is empty");
  return out;
}

EstimatorPlan estimator_of(const Options& o) {
  EstimatorPlan est;
  if (o.kernel.empty() && o.bandwidth.empty() && o.smooth_layers.empty()) return est;
  est.kind = EstimatorKind::mixed;
  if (!o.kernel.empty()) est.plan.kernel = KernelSpec::make(parse_kernel_family(o.kernel));
  if (!o.bandwidth.empty()) est.plan.schedule = parse_bandwidth(o.bandwidth);
  if (!o.smooth_layers.empty()) est.plan.layers = parse_layers(o.smooth_layers);
  return est;
}

MeasureConfig require_measure(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  return load_measure(path);
}

void check_sizes(const Options& o, bool replicated) {
  if (o.n < 1) throw ConfigError("--n must be positive");
  if (replicated && o.replications < 2) throw ConfigError("--replications must be at least 2");
  if (o.format != "json" && o.format != "csv") throw ConfigError("--format must be csv or json");
  two_sided_z(o.level);
}

nlohmann::json run_config(const Options& o, const EstimatorPlan& est) {
  nlohmann::json j;
  j["n"] = o.n;
  j["replications"] = o.replications;
  j["seed"] = o.seed;
  j["estimator"] = est.describe();
  j["law"] = o.law;
  if (!o.law2.empty()) j["law2"] = o.law2;
  return j;
}

std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
  std::ofstream f(dir / name);
  if (!f) throw ConfigError("cannot write '" + (dir / name).string() + "'");
  return f;
}

/// Writes estimates.csv, histogram.csv and summary.json under --out (when
/// given) and prints the summary JSON or estimates CSV to stdout.
void emit_study(const Options& o, const ReplicationTable& table, const nlohmann::json& config) {
  const DistributionSummary dist = summarize_distribution(table, table.reference, o.bins);
  std::ostringstream summary;
  write_summary_json(summary, dist.summary, dist.reference, config.dump());
  if (!o.out.empty()) {
    std::filesystem::create_directories(o.out);
    auto est = open_out(o.out, "estimates.csv");
    write_estimates_csv(est, table);
    auto hist = open_out(o.out, "histogram.csv");
    write_histogram_csv(hist, dist);
    auto js = open_out(o.out, "summary.json");
    js << summary.str();
  }
  if (o.format == "csv") {
    write_estimates_csv(std::cout, table);
  } else {
    std::cout << summary.str();
  }
}

int cmd_estimate(const Options& o) {
  check_sizes(o, false);
  const MeasureConfig cfg = require_measure(o.measure, "--measure");
  if (cfg.kind == MeasureKind::systemic) throw ConfigError("use the 'systemic' subcommand for systemic measures");
  const Law law = parse_law(o.law);
  const EstimatorPlan est = estimator_of(o);
  const Sample s = sample(SamplerConfig{law, law.dimension(), o.seed}, o.n);

  double value = 0.0;
  double limit_var = 0.0;
  nlohmann::json extra;
  if (cfg.optimizes()) {
    const ScalarFamily family = cfg.family();
    const auto [lo, hi] = default_bracket(s, cfg.params.c);
    ScalarProblem problem = ScalarProblem::empirical(family, s, lo, hi);
    if (est.kind == EstimatorKind::mixed) {
      problem = ScalarProblem::mixed(family, s, detail::resolve_plan(est, family(0.5 * (lo + hi)), 1), lo, hi);
    }
    const OptimalValueReport r = minimize_scalar(problem);
    value = r.theta;
    limit_var = optimal_value_clt_variance(problem, s, r.u_hat);
    extra["u_hat"] = r.u_hat;
    extra["boundary"] = r.boundary;
  } else {
    const CompositeSpec spec = cfg.spec(law.dimension());
    const EstimateReport r = est.kind == EstimatorKind::mixed
                                 ? estimate_mixed(spec, s, detail::resolve_plan(est, spec, law.dimension()))
                                 : estimate_empirical(spec, s);
    value = r.value(0);
    limit_var = asymptotic_report(spec, s, r, o.level).limit_cov(0, 0);
    if (r.bandwidth > 0.0) extra["bandwidth"] = r.bandwidth;
  }
  const double hw = two_sided_z(o.level) * std::sqrt(std::max(limit_var, 0.0) / static_cast<double>(o.n));
  if (o.format == "csv") {
    std::cout << "value,lower,upper,limit_variance\n"
              << format_double(value) << ',' << format_double(value - hw) << ',' << format_double(value + hw) << ','
              << format_double(limit_var) << '\n';
    return 0;
  }
  nlohmann::json j = extra;
  j["value"] = value;
  j["limit_variance"] = limit_var;
  j["interval"] = {{"level", o.level}, {"lower", value - hw}, {"upper", value + hw}};
  j["config"] = run_config(o, est);
  j["config"]["measure"] = measure_to_json(cfg);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_simulate(const Options& o, bool require_optimizing) {
  check_sizes(o, true);
  const MeasureConfig cfg = require_measure(o.measure, "--measure");
  if (cfg.kind == MeasureKind::systemic) throw ConfigError("use the 'systemic' subcommand for systemic measures");
  if (require_optimizing && !cfg.optimizes()) throw ConfigError("'optimize' needs a higher_order measure");
  const Law law = parse_law(o.law);
  const EstimatorPlan est = estimator_of(o);
  const ExactReference ref = exact_reference(cfg, law, law.dimension());
  const Experiment exp = make_experiment(cfg, SamplerConfig{law, law.dimension(), o.seed}, est);
  const ReplicationTable table = run_replications(
      exp, o.n, o.replications, o.seed, {ref.value, ref.limit_variance / static_cast<double>(o.n)}, o.workers);
  nlohmann::json config = run_config(o, est);
  config["measure"] = measure_to_json(cfg);
  config["limit_variance"] = ref.limit_variance;
  if (ref.u_hat) config["u_hat"] = *ref.u_hat;
  emit_study(o, table, config);
  return 0;
}

int cmd_compare(const Options& o) {
  check_sizes(o, true);
  const MeasureConfig a = require_measure(o.measure, "--measure");
  const MeasureConfig b = o.measure2.empty() ? a : load_measure(o.measure2);
  if (o.law2.empty()) throw ConfigError("--law2 is required");
  if (a.kind == MeasureKind::systemic || b.kind == MeasureKind::systemic) {
    throw ConfigError("compare does not accept systemic measures");
  }
  const Law la = parse_law(o.law);
  const Law lb = parse_law(o.law2);
  const EstimatorPlan est = estimator_of(o);
  const ExactReference ra = exact_reference(a, la, la.dimension());
  const ExactReference rb = exact_reference(b, lb, lb.dimension());
  const Experiment exp = make_difference_experiment(a, SamplerConfig{la, la.dimension(), 0}, b,
                                                    SamplerConfig{lb, lb.dimension(), 0}, est);
  const double var = (ra.limit_variance + rb.limit_variance) / static_cast<double>(o.n);
  const ReplicationTable table = run_replications(exp, o.n, o.replications, o.seed, {ra.value - rb.value, var}, o.workers);
  nlohmann::json config = run_config(o, est);
  config["measure"] = measure_to_json(a);
  config["measure2"] = measure_to_json(b);
  config["values"] = {ra.value, rb.value};
  config["limit_variances"] = {ra.limit_variance, rb.limit_variance};
  emit_study(o, table, config);
  return 0;
}

int cmd_systemic(const Options& o) {
  check_sizes(o, true);
  const MeasureConfig cfg = require_measure(o.measure, "--measure");
  if (cfg.kind != MeasureKind::systemic) throw ConfigError("'systemic' needs a systemic measure document");
  const EstimatorPlan est = estimator_of(o);
  const ExactReference ref = exact_reference(cfg, cfg.component_laws.front());
  const Experiment exp = make_experiment(cfg, {}, est);
  const ReplicationTable table = run_replications(
      exp, o.n, o.replications, o.seed, {ref.value, ref.limit_variance / static_cast<double>(o.n)}, o.workers);
  nlohmann::json config = run_config(o, est);
  config.erase("law");
  config["measure"] = measure_to_json(cfg);
  config["limit_variance"] = ref.limit_variance;
  emit_study(o, table, config);
  return 0;
}

int cmd_check_identity(const Options& o) {
  double p = o.p;
  if (!o.p_given && !o.measure.empty()) p = load_measure(o.measure).params.p;
  const KernelSpec kernel = KernelSpec::make(parse_kernel_family(o.kernel.empty() ? "uniform" : o.kernel), 1, p);
  const BandwidthSchedule schedule = parse_bandwidth(o.bandwidth.empty() ? "silverman" : o.bandwidth);
  const IdentityDiagnostic d = check_strong_identity(schedule, kernel, p);
  if (o.format == "csv") {
    std::cout << "pass,moment_exponent,bandwidth_condition\n"
              << (d.pass ? "true" : "false") << ',' << format_double(d.moment_exponent) << ','
              << (d.bandwidth_condition ? "true" : "false") << '\n';
  } else {
    nlohmann::json j;
    j["pass"] = d.pass;
    j["moment_exponent"] = std::isfinite(d.moment_exponent) ? nlohmann::json(d.moment_exponent) : nlohmann::json();
    j["bandwidth_condition"] = d.bandwidth_condition;
    j["explanation"] = d.explanation;
    std::cout << j.dump(2) << '\n';
  }
  return 0;
}

void add_common(CLI::App* cmd, Options& o, bool replicated) {
  cmd->add_option("--measure", o.measure, "measure JSON document");
  cmd->add_option("--law", o.law, "sampling law, e.g. normal_var:10,3 or product:normal:0,1;uniform:0,1");
  cmd->add_option("--n", o.n, "sample size");
  cmd->add_option("--seed", o.seed, "64-bit seed");
  cmd->add_option("--kernel", o.kernel, "uniform | gaussian | epanechnikov");
  cmd->add_option("--bandwidth", o.bandwidth, "silverman | power:a,gamma | none");
  cmd->add_option("--smooth-layers", o.smooth_layers, "comma list of smoothed layers (default: all)");
  cmd->add_option("--level", o.level, "confidence level");
  cmd->add_option("--format", o.format, "csv | json");
  if (replicated) {
    cmd->add_option("--replications", o.replications, "number of replications");
    cmd->add_option("--bins", o.bins, "histogram bins (0: Freedman-Diaconis)");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--workers", o.workers, "worker threads");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimation and simulation of composite risk functionals"};
  app.require_subcommand(1);
  Options o;
  auto* estimate = app.add_subcommand("estimate", "one-shot estimate with a confidence interval");
  auto* simulate = app.add_subcommand("simulate", "replication study against the exact limit");
  auto* compare = app.add_subcommand("compare", "difference of two risks on independent samples");
  auto* systemic = app.add_subcommand("systemic", "systemic risk replication study");
  auto* optimize = app.add_subcommand("optimize", "optimal-value replication study");
  auto* identity = app.add_subcommand("check-identity", "bandwidth schedule validity");
  add_common(estimate, o, false);
  add_common(simulate, o, true);
  add_common(compare, o, true);
  compare->add_option("--measure2", o.measure2, "second measure (default: --measure)");
  compare->add_option("--law2", o.law2, "second law");
  add_common(systemic, o, true);
  add_common(optimize, o, true);
  identity->add_option("--kernel", o.kernel, "uniform | gaussian | epanechnikov");
  identity->add_option("--bandwidth", o.bandwidth, "silverman | power:a,gamma | none");
  identity->add_option("--measure", o.measure, "measure JSON document (supplies p)");
  identity->add_option("--p", o.p, "power p")->each([&](const std::string&) { o.p_given = true; });
  identity->add_option("--format", o.format, "csv | json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*estimate) return cmd_estimate(o);
    if (*simulate) return cmd_simulate(o, false);
    if (*compare) return cmd_compare(o);
    if (*systemic) return cmd_systemic(o);
    if (*optimize) return cmd_simulate(o, true);
    if (*identity) return cmd_check_identity(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error [" << e.module() << (e.layer() > 0 ? ", layer " + std::to_string(e.layer()) : "")
              << "]: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
