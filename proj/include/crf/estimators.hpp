#pragma once

// Plug-in estimators of composite functionals: empirical, kernel smoothed,
// and mixed (smoothing only the layers in a chosen index set J).

#include "crf/core.hpp"
#include "crf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace crf {

/// n x m matrix of observations, one row per observation.
class Sample {
 public:
  explicit Sample(Matrix data) : data_(std::move(data)) {
    if (data_.rows() < 1 || data_.cols() < 1) throw ConfigError("sample must have at least one observation");
    if (!data_.allFinite()) throw ConfigError("sample contains non-finite entries");
  }

  static Sample from_values(std::span<const double> values) {
    Matrix m(static_cast<Eigen::Index>(values.size()), 1);
    for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[i];
    return Sample(std::move(m));
  }
  static Sample from_values(std::initializer_list<double> values) {
    return from_values(std::span<const double>(values.begin(), values.size()));
  }

  const Matrix& data() const { return data_; }
  Eigen::Index n() const { return data_.rows(); }
  Eigen::Index m() const { return data_.cols(); }

  std::vector<double> column(Eigen::Index c) const {
    std::vector<double> out(static_cast<std::size_t>(n()));
    for (Eigen::Index i = 0; i < n(); ++i) out[static_cast<std::size_t>(i)] = data_(i, c);
    return out;
  }

  /// Root mean of the per-coordinate sample variances (n-1 denominator).
  double pooled_std() const {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < m(); ++c) {
      const double s = sample_std(column(c));
      acc += s * s;
    }
    return std::sqrt(acc / static_cast<double>(m()));
  }

 private:
  Matrix data_;
};

struct SmoothingPlan {
  std::set<int> layers;  // J
  KernelSpec kernel = KernelSpec::make(KernelFamily::uniform);
  BandwidthSchedule schedule = BandwidthSchedule::silverman();
  int convolution_nodes = 64;
  std::optional<double> fixed_bandwidth;  // overrides the schedule when set

  static SmoothingPlan empirical() { return SmoothingPlan{}; }

  static SmoothingPlan all_layers(const CompositeSpec& spec, KernelSpec kernel, BandwidthSchedule schedule) {
    SmoothingPlan plan;
    for (int j = 1; j <= spec.signature.k + 1; ++j) plan.layers.insert(j);
    plan.kernel = kernel;
    plan.schedule = schedule;
    return plan;
  }

  bool smooths(int j) const { return layers.count(j) > 0; }

  std::string describe() const {
    if (layers.empty()) return "empirical";
    std::string s = to_string(kernel.family) + " kernel, " + schedule.describe() + ", J={";
    bool first = true;
    for (int j : layers) {
      s += (first ? "" : ",") + std::to_string(j);
      first = false;
    }
    return s + "}";
  }
};

struct EstimateReport {
  Vector value;
  EtaChain chain;
  SmoothingPlan plan;
  Eigen::Index n = 0;
  double bandwidth = 0.0;
};

/// Closed form of (1/n) sum_i int (max(0, X_i + z - u))^p K_h(z) dz for the
/// uniform kernel on [-h, h].
inline double uniform_kernel_powermax(std::span<const double> values, double u, double p, double h) {
  if (!(h > 0.0)) throw ConfigError("uniform_kernel_powermax: h must be positive");
  if (!(p > 1.0)) throw ConfigError("uniform_kernel_powermax: p must exceed 1");
  if (values.empty()) throw ConfigError("uniform_kernel_powermax: empty sample");
  std::vector<double> terms(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = values[i] - u;
    terms[i] = std::pow(std::max(0.0, h + x), p + 1.0) - std::pow(std::max(0.0, x - h), p + 1.0);
  }
  const double n = static_cast<double>(values.size());
  return pairwise_sum(terms) / (2.0 * n * (p + 1.0) * h);
}

inline double uniform_kernel_powermax(const Sample& sample, double u, double p, double h) {
  if (sample.m() != 1) throw ConfigError("uniform_kernel_powermax: sample must be one-dimensional");
  return uniform_kernel_powermax(sample.column(0), u, p, h);
}

namespace detail {

inline void check_sample(const CompositeSpec& spec, const Sample& sample) {
  require_valid(spec);
  if (sample.m() != spec.signature.m) {
    throw ConfigError("sample dimension " + std::to_string(sample.m()) + " does not match spec dimension " +
                      std::to_string(spec.signature.m));
  }
}

/// Convolution of layer j with the scaled kernel at every observation,
/// averaged over the sample.
inline Vector smoothed_layer_mean(const CompositeSpec& spec, int j, const Vector& eta, const Sample& sample,
                                  const SmoothingPlan& plan, double h) {
  const LayerFn& layer = spec.layer(j);
  const KernelSpec& kernel = plan.kernel;
  const PointMeasure measure = PointMeasure::empirical(sample.data());
  auto checked = [&](Vector v, Eigen::Index i) {
    if (!v.allFinite()) {
      throw NumericalError("estimators", j,
                           "non-finite smoothed output of layer " + std::to_string(j) + " at sample " + std::to_string(i));
    }
    return v;
  };

  if (layer.power_max) {
    const PowerMaxForm& form = *layer.power_max;
    const double u = form.threshold(eta);
    if (kernel.family == KernelFamily::uniform && form.scale != 0.0 && form.power > 1.0) {
      std::vector<double> s = sample.column(form.coordinate);
      for (double& v : s) v *= form.scale;
      Vector out(1);
      out(0) = uniform_kernel_powermax(s, u, form.power, h * std::abs(form.scale));
      if (!out.allFinite()) throw NumericalError("estimators", j, "non-finite closed-form smoothed mean");
      return out;
    }
    if (form.scale != 0.0) {
      // Only one coordinate matters; split the kernel support at the kink.
      // The gaussian kernel is truncated at 10 standard deviations.
      const int nodes = plan.convolution_nodes;
      const double edge = kernel.bounded_support() ? 1.0 : 10.0;
      const Rule1D full = kernel.bounded_support() ? kernel.rule(nodes) : kernel.rule_on(2 * nodes, -edge, edge);
      return measure.mean([&](Eigen::Index i, const Vector& x) {
        const double kink = (u / form.scale - x(form.coordinate)) / h;
        Rule1D rule = full;
        if (kink > -edge && kink < edge) {
          rule = kernel.rule_on(nodes, -edge, kink);
          const Rule1D right = kernel.rule_on(nodes, kink, edge);
          rule.nodes.insert(rule.nodes.end(), right.nodes.begin(), right.nodes.end());
          rule.weights.insert(rule.weights.end(), right.weights.begin(), right.weights.end());
        }
        Vector shifted = x;
        Vector acc = Vector::Zero(spec.signature.layer_output_dim(j));
        for (std::size_t q = 0; q < rule.size(); ++q) {
          shifted(form.coordinate) = x(form.coordinate) + h * rule.nodes[q];
          acc += rule.weights[q] * layer.evaluate(eta, shifted);
        }
        return checked(acc, i);
      });
    }
  }

  std::vector<Rule1D> rules(static_cast<std::size_t>(sample.m()), kernel.rule(plan.convolution_nodes));
  const QuadratureRule product = tensor_product(rules);
  return measure.mean([&](Eigen::Index i, const Vector& x) {
    Vector acc = Vector::Zero(spec.signature.layer_output_dim(j));
    for (Eigen::Index q = 0; q < product.size(); ++q) {
      const Vector shifted = x + h * product.nodes.row(q).transpose();
      acc += product.weights(q) * layer.evaluate(eta, shifted);
    }
    return checked(acc, i);
  });
}

}  // namespace detail

inline EstimateReport estimate_empirical(const CompositeSpec& spec, const Sample& sample) {
  detail::check_sample(spec, sample);
  const PointMeasure measure = PointMeasure::empirical(sample.data());
  EstimateReport report;
  report.chain = detail::chain_over(spec, measure, "estimators");
  report.value = report.chain.value();
  report.plan = SmoothingPlan::empirical();
  report.n = sample.n();
  return report;
}

/// Bandwidth the plan uses for this sample.
inline double plan_bandwidth(const SmoothingPlan& plan, const Sample& sample) {
  if (plan.fixed_bandwidth) {
    if (!(*plan.fixed_bandwidth >= 0.0)) throw ConfigError("fixed bandwidth must be non-negative");
    return *plan.fixed_bandwidth;
  }
  return bandwidth(plan.schedule, sample.n(), sample.pooled_std());
}

inline EstimateReport estimate_mixed(const CompositeSpec& spec, const Sample& sample, const SmoothingPlan& plan) {
  if (plan.layers.empty()) {
    EstimateReport r = estimate_empirical(spec, sample);
    r.plan = plan;
    return r;
  }
  detail::check_sample(spec, sample);
  for (int j : plan.layers) {
    if (j < 1 || j > spec.signature.k + 1) throw ConfigError("smoothing layer " + std::to_string(j) + " out of range");
  }
  if (plan.kernel.dimension != spec.signature.m) throw ConfigError("kernel dimension does not match sample dimension");
  if (plan.convolution_nodes < 3) throw ConfigError("convolution needs at least 3 quadrature nodes");

  const double h = plan_bandwidth(plan, sample);
  const PointMeasure measure = PointMeasure::empirical(sample.data());
  EstimateReport report;
  report.chain = detail::nest(spec, [&](int j, const Vector& eta) -> Vector {
    if (plan.smooths(j) && h > 0.0) return detail::smoothed_layer_mean(spec, j, eta, sample, plan, h);
    return detail::layer_mean(spec, j, eta, measure, "estimators");
  });
  report.value = report.chain.value();
  report.plan = plan;
  report.n = sample.n();
  report.bandwidth = h;
  return report;
}

}  // namespace crf
