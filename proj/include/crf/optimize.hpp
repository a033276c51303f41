#pragma once

// Scalar decision problems min_u f_1(u, E[f_2(u, X)]) and the limit
// variance of their optimal value.

#include "crf/asymptotics.hpp"
#include "crf/estimators.hpp"
#include "crf/measures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>

namespace crf {

enum class ObjectiveSource { exact_oracle, empirical_sample, mixed_plan };

struct ScalarProblem {
  ScalarFamily family;
  double lo = 0.0;
  double hi = 1.0;
  ObjectiveSource source = ObjectiveSource::empirical_sample;
  std::function<double(double)> objective;

  static ScalarProblem exact(ScalarFamily family, DistributionOracle oracle, double lo, double hi) {
    ScalarProblem pr = make(family, lo, hi, ObjectiveSource::exact_oracle);
    pr.objective = [family, oracle = std::move(oracle)](double u) {
      return eval_exact_chain(family(u), oracle).value()(0);
    };
    return pr;
  }

  static ScalarProblem empirical(ScalarFamily family, const Sample& sample, double lo, double hi) {
    ScalarProblem pr = make(family, lo, hi, ObjectiveSource::empirical_sample);
    pr.objective = [family, sample](double u) { return estimate_empirical(family(u), sample).value(0); };
    return pr;
  }

  /// The bandwidth is fixed from the sample once, so it does not vary with u.
  static ScalarProblem mixed(ScalarFamily family, const Sample& sample, SmoothingPlan plan, double lo, double hi) {
    ScalarProblem pr = make(family, lo, hi, ObjectiveSource::mixed_plan);
    if (!plan.layers.empty()) plan.fixed_bandwidth = plan_bandwidth(plan, sample);
    pr.objective = [family, sample, plan = std::move(plan)](double u) {
      return estimate_mixed(family(u), sample, plan).value(0);
    };
    return pr;
  }

 private:
  static ScalarProblem make(ScalarFamily family, double lo, double hi, ObjectiveSource source) {
    if (!(lo < hi)) throw ConfigError("scalar problem bracket needs lo < hi");
    ScalarProblem pr;
    pr.family = std::move(family);
    pr.lo = lo;
    pr.hi = hi;
    pr.source = source;
    return pr;
  }
};

/// [min X, max X + c * IQR(X)], widened to unit half-width when degenerate.
inline std::pair<double, double> default_bracket(const Sample& sample, double c) {
  std::vector<double> xs = sample.column(0);
  std::sort(xs.begin(), xs.end());
  const double iqr = sorted_quantile(xs, 0.75) - sorted_quantile(xs, 0.25);
  double lo = xs.front();
  double hi = xs.back() + c * iqr;
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  return {lo, hi};
}

struct OptimalValueReport {
  double u_hat = 0.0;
  double theta = 0.0;
  int iterations = 0;
  bool boundary = false;
  std::optional<double> limit_variance;
};

/// Golden-section search down to bracket width tol, then one parabolic step
/// kept only if it lowers the objective.
inline OptimalValueReport minimize_scalar(const ScalarProblem& problem, double tol = 1e-8) {
  if (!(tol > 0.0)) throw ConfigError("minimize_scalar: tol must be positive");
  if (!problem.objective) throw ConfigError("minimize_scalar: problem has no objective");
  auto f = [&](double u) {
    const double v = problem.objective(u);
    if (!std::isfinite(v)) throw NumericalError("optimize", 0, "objective is not finite at u = " + std::to_string(u));
    return v;
  };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = problem.lo;
  double b = problem.hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  int iterations = 0;
  while (b - a > tol && iterations < 1000) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
    ++iterations;
  }
  OptimalValueReport out;
  out.u_hat = f1 <= f2 ? x1 : x2;
  out.theta = std::min(f1, f2);

  // Parabola through (a, x_best, b).
  const double fa = f(a);
  const double fb = f(b);
  const double xm = out.u_hat;
  const double fm = out.theta;
  const double num = (xm - a) * (xm - a) * (fm - fb) - (xm - b) * (xm - b) * (fm - fa);
  const double den = (xm - a) * (fm - fb) - (xm - b) * (fm - fa);
  if (den != 0.0) {
    const double cand = xm - 0.5 * num / den;
    if (cand > a && cand < b) {
      const double fc = f(cand);
      if (fc < out.theta) {
        out.u_hat = cand;
        out.theta = fc;
      }
    }
  }
  if (fa < out.theta) {
    out.u_hat = a;
    out.theta = fa;
  }
  if (fb < out.theta) {
    out.u_hat = b;
    out.theta = fb;
  }
  out.iterations = iterations;
  out.boundary = out.u_hat - problem.lo <= tol || problem.hi - out.u_hat <= tol;
  return out;
}

/// True when more than 1% of an evenly spaced grid on the bracket lies
/// within rel_tol of the optimal value, i.e. the minimizer is not unique.
inline bool flat_optimum(const ScalarProblem& problem, const OptimalValueReport& report, int grid = 1000,
                         double rel_tol = 1e-6) {
  int close = 0;
  for (int i = 0; i <= grid; ++i) {
    const double u = problem.lo + (problem.hi - problem.lo) * i / grid;
    if (problem.objective(u) - report.theta <= rel_tol * std::max(1.0, std::abs(report.theta))) ++close;
  }
  return close > grid / 100;
}

namespace detail {

inline double optimal_value_variance_over(const CompositeSpec& spec, const PointMeasure& measure) {
  const auto n = measure.size();
  if (spec.signature.output_dim() != 1) throw ConfigError("optimal value variance: objective must be scalar");
  std::vector<double> infl(static_cast<std::size_t>(n));
  auto weighted_mean_square = [&](const std::vector<double>& v) {
    std::vector<double> t(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      t[i] = measure.is_empirical() ? v[i] * v[i] : measure.weight(static_cast<Eigen::Index>(i)) * v[i] * v[i];
    }
    const double s = pairwise_sum(t);
    return measure.is_empirical() ? s / static_cast<double>(v.size()) : s;
  };
  if (spec.signature.k == 0) {
    const Vector mean = layer_mean(spec, 1, Vector(), measure, "optimize");
    for (Eigen::Index i = 0; i < n; ++i) {
      infl[static_cast<std::size_t>(i)] = spec.layer(1).evaluate(Vector(), measure.point(i))(0) - mean(0);
    }
    return weighted_mean_square(infl);
  }
  if (spec.signature.k != 1 || spec.signature.dims[1] != 1) {
    throw ConfigError("optimal value variance: expected a two-level scalar family");
  }
  const LayerFn& outer = spec.layer(1);
  const LayerFn& inner = spec.layer(2);
  const Vector eta = layer_mean(spec, 2, Vector(), measure, "optimize");
  const Vector outer_mean = layer_mean(spec, 1, eta, measure, "optimize");
  std::vector<double> inner_dev(static_cast<std::size_t>(n));
  std::vector<double> outer_dev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector x = measure.point(i);
    inner_dev[static_cast<std::size_t>(i)] = inner.evaluate(Vector(), x)(0) - eta(0);
    outer_dev[static_cast<std::size_t>(i)] = outer.evaluate(eta, x)(0) - outer_mean(0);
  }
  if (!(eta(0) > 0.0)) {
    bool point_mass = true;
    for (Eigen::Index i = 1; i < n && point_mass; ++i) point_mass = measure.point(i) == measure.point(0);
    if (point_mass) return weighted_mean_square(outer_dev);
    throw NumericalError("optimize", 2, "degenerate tail: no sample mass above the minimizer");
  }
  const bool inner_constant = std::all_of(inner_dev.begin(), inner_dev.end(), [](double d) { return d == 0.0; });
  if (inner_constant) return weighted_mean_square(outer_dev);
  const Matrix grad = measure.mean([&](Eigen::Index, const Vector& x) { return layer_jacobian(outer, eta, x, true); });
  if (!(eta(0) > 0.0) || !grad.allFinite()) {
    throw NumericalError("optimize", 1, "degenerate tail: outer gradient is singular at the optimum");
  }
  for (std::size_t i = 0; i < infl.size(); ++i) infl[i] = outer_dev[i] + grad(0, 0) * inner_dev[i];
  return weighted_mean_square(infl);
}

}  // namespace detail

/// Plug-in limit variance of sqrt(n)(theta_n - theta) at a unique
/// minimizer: Var[f_1(u, eta, X) + grad f_1 * f_2(u, X)], which for the
/// higher-order family is (grad f_1)^2 Var[f_2(u_hat, X)].
inline double optimal_value_clt_variance(const ScalarProblem& problem, const Sample& sample, double u_hat) {
  const CompositeSpec spec = problem.family(u_hat);
  detail::check_sample(spec, sample);
  return detail::optimal_value_variance_over(spec, PointMeasure::empirical(sample.data()));
}

/// Same quantity against the oracle law.
inline double optimal_value_clt_variance(const ScalarProblem& problem, const DistributionOracle& oracle,
                                         double u_hat) {
  const CompositeSpec spec = problem.family(u_hat);
  require_valid(spec);
  return with_oracle_measure(oracle, [&](const PointMeasure& m) { return detail::optimal_value_variance_over(spec, m); });
}

}  // namespace crf
