#pragma once

// Monte Carlo replication studies: per-replication estimators, a
// deterministic multi-threaded runner, distribution summaries and the CSV /
// JSON writers used by the CLI.

#include "crf/asymptotics.hpp"
#include "crf/config.hpp"
#include "crf/estimators.hpp"
#include "crf/measures.hpp"
#include "crf/optimize.hpp"
#include "crf/random.hpp"
#include "crf/sampling.hpp"
#include "crf/stats.hpp"

#include <cinttypes>
#include <cstdio>
#include <exception>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace crf {

enum class EstimatorKind { empirical, mixed };

/// Estimator choice for a study: empirical, or mixed with a plan. An empty
/// plan.layers with kind == mixed means "smooth every layer".
struct EstimatorPlan {
  EstimatorKind kind = EstimatorKind::empirical;
  SmoothingPlan plan;

  std::string describe() const { return kind == EstimatorKind::empirical ? "empirical" : resolved_description(); }

 private:
  std::string resolved_description() const {
    std::string s = to_string(plan.kernel.family) + " kernel, " + plan.schedule.describe() + ", J=";
    if (plan.layers.empty()) return s + "all";
    bool first = true;
    for (int j : plan.layers) {
      s += (first ? "" : ",") + std::to_string(j);
      first = false;
    }
    return s;
  }
};

namespace detail {

inline SmoothingPlan resolve_plan(const EstimatorPlan& est, const CompositeSpec& spec, int m) {
  SmoothingPlan plan = est.plan;
  if (plan.layers.empty()) {
    for (int j = 1; j <= spec.signature.k + 1; ++j) plan.layers.insert(j);
  }
  plan.kernel = KernelSpec::make(plan.kernel.family, m, plan.kernel.moment_order);
  return plan;
}

}  // namespace detail

/// Scalar risk estimate of a (non-systemic) measure from one sample.
inline double estimate_measure(const MeasureConfig& cfg, const Sample& sample, const EstimatorPlan& est) {
  const int m = static_cast<int>(sample.m());
  if (cfg.optimizes()) {
    const ScalarFamily family = cfg.family();
    const auto [lo, hi] = default_bracket(sample, cfg.params.c);
    if (est.kind == EstimatorKind::mixed) {
      const SmoothingPlan plan = detail::resolve_plan(est, family(0.5 * (lo + hi)), m);
      try {
        return minimize_scalar(ScalarProblem::mixed(family, sample, plan, lo, hi)).theta;
      } catch (const DegenerateSmoothing&) {
        // zero spread: smoothing collapses to the empirical estimator
      }
    }
    return minimize_scalar(ScalarProblem::empirical(family, sample, lo, hi)).theta;
  }
  const CompositeSpec spec = cfg.spec(m);
  if (est.kind == EstimatorKind::mixed) {
    try {
      return estimate_mixed(spec, sample, detail::resolve_plan(est, spec, m)).value(0);
    } catch (const DegenerateSmoothing&) {
    }
  }
  return estimate_empirical(spec, sample).value(0);
}

/// Exact value and limit variance (of sqrt(n)(estimate - value)) under a
/// scalar or product law, from the quadrature oracle.
struct ExactReference {
  double value = 0.0;
  double limit_variance = 0.0;
  std::optional<double> u_hat;
};

inline ExactReference exact_reference(const MeasureConfig& cfg, const Law& law, int dimension = 1) {
  if (cfg.kind == MeasureKind::systemic) {
    const SystemicSpec sys = cfg.systemic();
    const auto l = static_cast<Eigen::Index>(cfg.components.size());
    Vector risks(l);
    std::vector<double> variances;
    for (Eigen::Index i = 0; i < l; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      const ExactReference r = exact_reference(cfg.components[idx], cfg.component_laws[idx], cfg.component_laws[idx].dimension());
      risks(i) = r.value;
      variances.push_back(r.limit_variance);
    }
    ExactReference out;
    out.value = systemic_value(risks, sys);
    // Independent components: sum of squared directional slopes times the
    // component variances (exact where the aggregation is differentiable).
    for (Eigen::Index i = 0; i < l; ++i) {
      const Vector e = Vector::Unit(l, i);
      const double slope = aggregation_directional_derivative(risks, e, sys);
      out.limit_variance += slope * slope * variances[static_cast<std::size_t>(i)];
    }
    return out;
  }
  const DistributionOracle oracle = make_oracle(law, dimension);
  ExactReference out;
  if (cfg.optimizes()) {
    if (law.kind == Law::Kind::product || dimension != 1) throw ConfigError("optimized measures need a scalar law");
    const double mu = law.mean();
    const double sd = law.std_dev();
    double lo = mu - 5.0 * sd;
    double hi = mu + 15.0 * sd;
    if (law.kind != Law::Kind::normal) {
      lo = std::min(law.a, law.b) - 1.0;
      hi = std::max(law.a, law.b) + 1.0;
    }
    const ScalarProblem problem = ScalarProblem::exact(cfg.family(), oracle, lo, hi);
    const OptimalValueReport r = minimize_scalar(problem);
    out.value = r.theta;
    out.u_hat = r.u_hat;
    out.limit_variance = optimal_value_clt_variance(problem, oracle, r.u_hat);
    return out;
  }
  const CompositeSpec spec = cfg.spec(oracle.dimension);
  const EtaChain chain = eval_exact_chain(spec, oracle);
  out.value = chain.value()(0);
  out.limit_variance = limit_variance(exact_sigma(spec, oracle, chain), exact_chain_matrices(spec, oracle, chain))(0, 0);
  return out;
}

/// One replication: seed -> estimate vector.
struct Experiment {
  std::string label;
  int output_dim = 1;
  std::function<Vector(std::uint64_t seed, Eigen::Index n)> run_once;
};

inline Experiment make_experiment(const MeasureConfig& cfg, const SamplerConfig& sampler, const EstimatorPlan& est) {
  if (cfg.kind == MeasureKind::systemic) {
    Experiment exp;
    exp.label = cfg.label + " [" + est.describe() + "]";
    const SystemicSpec sys = cfg.systemic();
    exp.run_once = [cfg, sys, est](std::uint64_t seed, Eigen::Index n) {
      Vector risks(static_cast<Eigen::Index>(cfg.components.size()));
      for (std::size_t i = 0; i < cfg.components.size(); ++i) {
        const SamplerConfig sc{cfg.component_laws[i], cfg.component_laws[i].dimension(), hash64(seed, i)};
        risks(static_cast<Eigen::Index>(i)) = estimate_measure(cfg.components[i], sample(sc, n), est);
      }
      Vector out(1);
      out(0) = systemic_value(risks, sys);
      return out;
    };
    return exp;
  }
  Experiment exp;
  exp.label = cfg.label + " [" + est.describe() + "]";
  exp.run_once = [cfg, sampler, est](std::uint64_t seed, Eigen::Index n) {
    SamplerConfig sc = sampler;
    sc.seed = seed;
    Vector out(1);
    out(0) = estimate_measure(cfg, sample(sc, n), est);
    return out;
  };
  return exp;
}

/// rho_a(X_a) - rho_b(X_b) on independent samples of equal size.
inline Experiment make_difference_experiment(const MeasureConfig& a, const SamplerConfig& sa, const MeasureConfig& b,
                                             const SamplerConfig& sb, const EstimatorPlan& est) {
  Experiment exp;
  exp.label = a.label + " - " + b.label + " [" + est.describe() + "]";
  exp.run_once = [=](std::uint64_t seed, Eigen::Index n) {
    SamplerConfig ca = sa;
    SamplerConfig cb = sb;
    ca.seed = hash64(seed, 0);
    cb.seed = hash64(seed, 1);
    Vector out(1);
    out(0) = estimate_measure(a, sample(ca, n), est) - estimate_measure(b, sample(cb, n), est);
    return out;
  };
  return exp;
}

struct ReferenceNormal {
  double mean = 0.0;
  double variance = 0.0;  // variance of the estimator itself (v / n)
};

struct ReplicationSummary {
  double mean = 0.0;
  double bias = 0.0;
  double std_dev = 0.0;
  double ks = 0.0;
  bool degenerate = false;
};

struct ReplicationTable {
  Matrix estimates;  // R x m_0
  std::string label;
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  ReferenceNormal reference;
  ReplicationSummary summary;

  std::vector<double> column(Eigen::Index c = 0) const {
    std::vector<double> out(static_cast<std::size_t>(estimates.rows()));
    for (Eigen::Index r = 0; r < estimates.rows(); ++r) out[static_cast<std::size_t>(r)] = estimates(r, c);
    return out;
  }
};

inline ReplicationSummary summarize(const std::vector<double>& values, const ReferenceNormal& ref) {
  ReplicationSummary s;
  s.mean = crf::mean(values);
  s.bias = s.mean - ref.mean;
  s.std_dev = sample_std(values);
  s.degenerate = !(s.std_dev > 0.0) || !(ref.variance > 0.0);
  if (s.degenerate) {
    s.ks = std::numeric_limits<double>::quiet_NaN();
  } else {
    const double sd = std::sqrt(ref.variance);
    s.ks = ks_distance(values, [&](double x) { return normal_cdf((x - ref.mean) / sd); });
  }
  return s;
}

/// Replication r draws with seed hash64(seed, r); rows are filled by index,
/// so the table does not depend on the worker count.
inline ReplicationTable run_replications(const Experiment& exp, Eigen::Index n, Eigen::Index replications,
                                         std::uint64_t seed, const ReferenceNormal& reference, unsigned workers = 1) {
  if (n < 1) throw ConfigError("run_replications: n must be positive");
  if (replications < 1) throw ConfigError("run_replications: need at least one replication");
  ReplicationTable table;
  table.estimates = Matrix::Zero(replications, exp.output_dim);
  table.label = exp.label;
  table.n = n;
  table.seed = seed;
  table.reference = reference;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(replications)));

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(replications));
  auto work = [&](unsigned w) {
    for (Eigen::Index r = w; r < replications; r += workers) {
      try {
        const Vector v = exp.run_once(hash64(seed, static_cast<std::uint64_t>(r)), n);
        if (v.size() != exp.output_dim) throw ConfigError("experiment returned wrong dimension");
        table.estimates.row(r) = v.transpose();
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (std::size_t r = 0; r < errors.size(); ++r) {
    if (!errors[r]) continue;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const NumericalError& e) {
      throw NumericalError(e.module(), e.layer(), "replication " + std::to_string(r) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError("replication " + std::to_string(r) + ": " + e.what());
    } catch (const std::exception& e) {
      throw NumericalError("harness", 0, "replication " + std::to_string(r) + ": " + e.what());
    }
  }
  table.summary = summarize(table.column(0), reference);
  return table;
}

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  double density = 0.0;
  double reference_density = 0.0;
};

struct DistributionSummary {
  ReplicationSummary summary;
  ReferenceNormal reference;
  std::vector<HistogramBin> histogram;
};

/// Freedman-Diaconis bin count clamped to [10, 100].
inline int freedman_diaconis_bins(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const double iqr = sorted_quantile(values, 0.75) - sorted_quantile(values, 0.25);
  const double range = values.back() - values.front();
  if (!(iqr > 0.0) || !(range > 0.0)) return 10;
  const double width = 2.0 * iqr * std::pow(static_cast<double>(values.size()), -1.0 / 3.0);
  const double bins = std::ceil(range / width);
  return static_cast<int>(std::clamp(bins, 10.0, 100.0));
}

/// Density histogram over [min, max] of column 0 with the reference normal
/// density at bin centres. bins = 0 selects Freedman-Diaconis.
inline DistributionSummary summarize_distribution(const ReplicationTable& table, const ReferenceNormal& reference,
                                                  int bins = 0) {
  const std::vector<double> values = table.column(0);
  if (values.size() < 2) throw ConfigError("summarize_distribution: need at least two replications");
  DistributionSummary out;
  out.reference = reference;
  out.summary = summarize(values, reference);
  if (bins <= 0) bins = freedman_diaconis_bins(values);
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) {
    out.summary.degenerate = true;
    return out;
  }
  const double width = (hi - lo) / bins;
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / width);
    if (b >= counts.size()) b = counts.size() - 1;
    counts[b] += 1.0;
  }
  const double total = static_cast<double>(values.size());
  const double sd = std::sqrt(std::max(reference.variance, 0.0));
  for (int b = 0; b < bins; ++b) {
    HistogramBin bin;
    bin.left = lo + b * width;
    bin.right = b + 1 == bins ? hi : lo + (b + 1) * width;
    bin.density = counts[static_cast<std::size_t>(b)] / (total * width);
    const double centre = 0.5 * (bin.left + bin.right);
    bin.reference_density = sd > 0.0 ? normal_pdf((centre - reference.mean) / sd) / sd : 0.0;
    out.histogram.push_back(bin);
  }
  return out;
}

// ---- serialization -------------------------------------------------------

inline std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// JSON number; non-finite values become null.
inline std::string json_number(double v) { return std::isfinite(v) ? format_double(v) : "null"; }

inline std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

inline void write_estimates_csv(std::ostream& os, const ReplicationTable& table) {
  os << "replication,value";
  for (Eigen::Index c = 1; c < table.estimates.cols(); ++c) os << ",coord" << c;
  os << '\n';
  for (Eigen::Index r = 0; r < table.estimates.rows(); ++r) {
    os << r;
    for (Eigen::Index c = 0; c < table.estimates.cols(); ++c) os << ',' << format_double(table.estimates(r, c));
    os << '\n';
  }
}

inline void write_histogram_csv(std::ostream& os, const DistributionSummary& dist) {
  os << "bin_left,bin_right,density,reference_density\n";
  for (const auto& b : dist.histogram) {
    os << format_double(b.left) << ',' << format_double(b.right) << ',' << format_double(b.density) << ','
       << format_double(b.reference_density) << '\n';
  }
}

/// {mean, bias, std, ks, reference: {mean, variance}, config}; `config` is
/// spliced in verbatim and must already be JSON.
inline void write_summary_json(std::ostream& os, const ReplicationSummary& s, const ReferenceNormal& ref,
                               const std::string& config_json) {
  os << "{\"mean\":" << json_number(s.mean) << ",\"bias\":" << json_number(s.bias) << ",\"std\":"
     << json_number(s.std_dev) << ",\"ks\":" << json_number(s.ks) << ",\"degenerate\":" << (s.degenerate ? "true" : "false")
     << ",\"reference\":{\"mean\":" << json_number(ref.mean) << ",\"variance\":" << json_number(ref.variance)
     << "},\"config\":" << config_json << "}\n";
}

}  // namespace crf
