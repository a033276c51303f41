#pragma once

// Concrete risk functionals expressed as composite specs, and systemic
// aggregation of component risks.

#include "crf/core.hpp"
#include "crf/random.hpp"
#include "crf/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace crf {

struct MeasureParams {
  double kappa = 0.5;
  double p = 2.0;
  double c = 2.0;        // higher-order scale, 1/alpha
  Vector weights;        // systemic weights c_1..c_l
  std::vector<std::string> labels;
};

namespace detail {

inline void require_kappa_p(const MeasureParams& params, const char* who) {
  if (!(params.kappa >= 0.0 && params.kappa <= 1.0)) throw ConfigError(std::string(who) + ": kappa must lie in [0, 1]");
  if (!(params.p > 1.0) || !std::isfinite(params.p)) {
    throw ConfigError(std::string(who) + ": p must exceed 1 (use the expectation form for p = 1)");
  }
}

inline Vector scalar(double v) {
  Vector out(1);
  out(0) = v;
  return out;
}

inline Matrix scalar_matrix(double v) {
  Matrix out(1, 1);
  out(0, 0) = v;
  return out;
}

inline double plus_pow(double v, double p) { return v > 0.0 ? std::pow(v, p) : 0.0; }

}  // namespace detail

inline void validate_weights(const Vector& weights) {
  if (weights.size() == 0) throw ConfigError("weights must be non-empty");
  if ((weights.array() < 0.0).any()) throw ConfigError("weights must be non-negative");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw ConfigError("weights must sum to 1");
}

/// rho[X] = E[X] + kappa * || (E[X] - X)_+ ||_p as a depth-2 composite:
/// f_1(eta, x) = x + kappa eta^(1/p), f_2(eta, x) = (eta - x)_+^p, f_3(x) = x.
inline CompositeSpec make_mean_semideviation(const MeasureParams& params) {
  detail::require_kappa_p(params, "mean_semideviation");
  const double kappa = params.kappa;
  const double p = params.p;
  CompositeSpec spec;
  spec.label = "mean_semideviation(kappa=" + std::to_string(kappa) + ", p=" + std::to_string(p) + ")";
  spec.signature = {1, 2, {1, 1, 1}};

  LayerFn f1;
  f1.index = 1;
  f1.evaluate = [=](const Vector& eta, const Vector& x) {
    return detail::scalar(x(0) + kappa * std::pow(eta(0), 1.0 / p));
  };
  f1.jacobian_eta = [=](const Vector& eta, const Vector&) {
    return detail::scalar_matrix(kappa / p * std::pow(eta(0), 1.0 / p - 1.0));
  };
  f1.lipschitz = LipschitzBound{1.0, 0.0};

  LayerFn f2;
  f2.index = 2;
  f2.evaluate = [=](const Vector& eta, const Vector& x) { return detail::scalar(detail::plus_pow(eta(0) - x(0), p)); };
  f2.jacobian_eta = [=](const Vector& eta, const Vector& x) {
    return detail::scalar_matrix(p * detail::plus_pow(eta(0) - x(0), p - 1.0));
  };
  f2.lipschitz = LipschitzBound{p, p - 1.0};
  f2.power_max = PowerMaxForm{0, -1.0, [](const Vector& eta) { return -eta(0); }, p};

  LayerFn f3;
  f3.index = 3;
  f3.evaluate = [](const Vector&, const Vector& x) { return detail::scalar(x(0)); };
  f3.lipschitz = LipschitzBound{1.0, 0.0};

  spec.layers = {f1, f2, f3};
  return spec;
}

/// Plain expectation E[X_coordinate] (k = 0).
inline CompositeSpec make_mean(int m = 1, Eigen::Index coordinate = 0) {
  CompositeSpec spec;
  spec.label = "mean";
  spec.signature = {m, 0, {1}};
  LayerFn f1;
  f1.index = 1;
  f1.evaluate = [coordinate](const Vector&, const Vector& x) { return detail::scalar(x(coordinate)); };
  f1.lipschitz = LipschitzBound{1.0, 0.0};
  spec.layers = {f1};
  return spec;
}

using ScalarFamily = std::function<CompositeSpec(double u)>;
using VectorFamily = std::function<CompositeSpec(const Vector& u)>;

/// Objective of min_u { u + c || (X - u)_+ ||_p } as a family in u:
/// f_1(u, eta, x) = u + c eta^(1/p), f_2(u, x) = (x - u)_+^p.
/// For p = 1 no composition is needed and the family is the expectation of
/// u + c (x - u)_+.
inline ScalarFamily make_higher_order_family(const MeasureParams& params) {
  if (!(params.c > 1.0)) throw ConfigError("higher_order: c must exceed 1");
  if (!(params.p >= 1.0) || !std::isfinite(params.p)) throw ConfigError("higher_order: p must be at least 1");
  const double c = params.c;
  const double p = params.p;
  if (p == 1.0) {
    return [=](double u) {
      CompositeSpec spec;
      spec.label = "higher_order(c=" + std::to_string(c) + ", p=1)";
      spec.signature = {1, 0, {1}};
      LayerFn f1;
      f1.index = 1;
      f1.evaluate = [=](const Vector&, const Vector& x) { return detail::scalar(u + c * std::max(0.0, x(0) - u)); };
      spec.layers = {f1};
      return spec;
    };
  }
  return [=](double u) {
    CompositeSpec spec;
    spec.label = "higher_order(c=" + std::to_string(c) + ", p=" + std::to_string(p) + ")";
    spec.signature = {1, 1, {1, 1}};
    LayerFn f1;
    f1.index = 1;
    f1.evaluate = [=](const Vector& eta, const Vector&) { return detail::scalar(u + c * std::pow(eta(0), 1.0 / p)); };
    f1.jacobian_eta = [=](const Vector& eta, const Vector&) {
      return detail::scalar_matrix(c / p * std::pow(eta(0), 1.0 / p - 1.0));
    };
    LayerFn f2;
    f2.index = 2;
    f2.evaluate = [=](const Vector&, const Vector& x) { return detail::scalar(detail::plus_pow(x(0) - u, p)); };
    f2.lipschitz = LipschitzBound{p, p - 1.0};
    f2.power_max = PowerMaxForm{0, 1.0, [u](const Vector&) { return u; }, p};
    spec.layers = {f1, f2};
    return spec;
  };
}

/// Portfolio mean-semideviation of losses for allocation u over R^m:
/// f_1 = -u^T x + kappa eta^(1/p), f_2 = (eta - u^T x)_+^p, f_3 = u^T x.
inline VectorFamily make_portfolio_semideviation(const MeasureParams& params, int m) {
  detail::require_kappa_p(params, "portfolio_semideviation");
  if (m < 1) throw ConfigError("portfolio_semideviation: dimension must be positive");
  const double kappa = params.kappa;
  const double p = params.p;
  return [=](const Vector& u) {
    if (u.size() != m || !u.allFinite()) throw ConfigError("portfolio_semideviation: bad allocation vector");
    CompositeSpec spec;
    spec.label = "portfolio_semideviation(kappa=" + std::to_string(kappa) + ", p=" + std::to_string(p) + ")";
    spec.signature = {m, 2, {1, 1, 1}};
    LayerFn f1;
    f1.index = 1;
    f1.evaluate = [=](const Vector& eta, const Vector& x) {
      return detail::scalar(-u.dot(x) + kappa * std::pow(eta(0), 1.0 / p));
    };
    f1.jacobian_eta = [=](const Vector& eta, const Vector&) {
      return detail::scalar_matrix(kappa / p * std::pow(eta(0), 1.0 / p - 1.0));
    };
    f1.lipschitz = LipschitzBound{u.norm(), 0.0};
    LayerFn f2;
    f2.index = 2;
    f2.evaluate = [=](const Vector& eta, const Vector& x) { return detail::scalar(detail::plus_pow(eta(0) - u.dot(x), p)); };
    f2.jacobian_eta = [=](const Vector& eta, const Vector& x) {
      return detail::scalar_matrix(p * detail::plus_pow(eta(0) - u.dot(x), p - 1.0));
    };
    f2.lipschitz = LipschitzBound{p * u.norm(), p - 1.0};
    // Closed-form smoothing applies when the allocation loads one coordinate.
    Eigen::Index nonzero = 0;
    Eigen::Index coord = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (u(i) != 0.0) {
        ++nonzero;
        coord = i;
      }
    }
    if (nonzero == 1) f2.power_max = PowerMaxForm{coord, -u(coord), [](const Vector& eta) { return -eta(0); }, p};
    LayerFn f3;
    f3.index = 3;
    f3.evaluate = [=](const Vector&, const Vector& x) { return detail::scalar(u.dot(x)); };
    f3.lipschitz = LipschitzBound{u.norm(), 0.0};
    spec.layers = {f1, f2, f3};
    return spec;
  };
}

/// Adds identity layers on the outside until the spec has depth k.
/// Neither the value nor the limit variance changes.
inline CompositeSpec pad_to_depth(const CompositeSpec& spec, int k) {
  const int extra = k - spec.signature.k;
  if (extra < 0) throw ConfigError("pad_to_depth: target depth below current depth");
  if (extra == 0) return spec;
  CompositeSpec out;
  out.label = spec.label;
  const int m0 = spec.signature.output_dim();
  out.signature.m = spec.signature.m;
  out.signature.k = k;
  out.signature.dims.assign(static_cast<std::size_t>(extra), m0);
  out.signature.dims.insert(out.signature.dims.end(), spec.signature.dims.begin(), spec.signature.dims.end());
  for (int j = 1; j <= extra; ++j) {
    LayerFn id;
    id.index = j;
    id.evaluate = [](const Vector& eta, const Vector&) { return eta; };
    id.jacobian_eta = [m0](const Vector&, const Vector&) { return Matrix::Identity(m0, m0).eval(); };
    id.lipschitz = LipschitzBound{0.0, 0.0};
    out.layers.push_back(std::move(id));
  }
  for (const LayerFn& layer : spec.layers) {
    LayerFn shifted = layer;
    shifted.index = layer.index + extra;
    out.layers.push_back(std::move(shifted));
  }
  return out;
}

enum class OuterKind { linear, mean_semideviation };

struct OuterAggregation {
  OuterKind kind = OuterKind::linear;
  double kappa = 0.0;
  double p = 1.0;
};

struct SystemicSpec {
  std::vector<CompositeSpec> components;
  Vector weights;
  OuterAggregation outer;
};

/// Pads components to a common depth and checks the weights.
inline SystemicSpec make_systemic(std::vector<CompositeSpec> components, Vector weights, OuterAggregation outer) {
  if (components.empty()) throw ConfigError("systemic: need at least one component");
  if (weights.size() != static_cast<Eigen::Index>(components.size())) {
    throw ConfigError("systemic: one weight per component required");
  }
  validate_weights(weights);
  if (outer.kind == OuterKind::mean_semideviation) {
    if (!(outer.kappa >= 0.0 && outer.kappa <= 1.0)) throw ConfigError("systemic: kappa must lie in [0, 1]");
    if (!(outer.p >= 1.0)) throw ConfigError("systemic: outer p must be at least 1");
  }
  int depth = 0;
  for (const auto& c : components) {
    require_valid(c);
    if (c.signature.output_dim() != 1) throw ConfigError("systemic: components must be scalar-valued");
    depth = std::max(depth, c.signature.k);
  }
  for (auto& c : components) c = pad_to_depth(c, depth);
  return {std::move(components), std::move(weights), outer};
}

/// <c, r> + kappa (sum_i c_i (r_i - <c, r>)_+^p)^(1/p), or <c, r> for the
/// linear aggregation.
inline double aggregate(const Vector& risks, const Vector& weights, const OuterAggregation& outer) {
  if (risks.size() != weights.size()) throw ConfigError("systemic_value: risk vector has wrong dimension");
  const double centre = weights.dot(risks);
  if (outer.kind == OuterKind::linear) return centre;
  double tail = 0.0;
  for (Eigen::Index i = 0; i < risks.size(); ++i) tail += weights(i) * detail::plus_pow(risks(i) - centre, outer.p);
  return centre + outer.kappa * std::pow(tail, 1.0 / outer.p);
}

inline double systemic_value(const Vector& estimates, const SystemicSpec& spec) {
  return aggregate(estimates, spec.weights, spec.outer);
}

/// Directional derivative of the aggregation at `risks` along `direction`,
/// by a one-sided difference with relative step 1e-6.
inline double aggregation_directional_derivative(const Vector& risks, const Vector& direction, const SystemicSpec& spec) {
  if (spec.outer.kind == OuterKind::linear) return spec.weights.dot(direction);
  const double norm = direction.lpNorm<Eigen::Infinity>();
  if (norm == 0.0) return 0.0;
  const Vector unit = direction / norm;
  const double t = 1e-6 * std::max(1.0, risks.lpNorm<Eigen::Infinity>());
  const double base = systemic_value(risks, spec);
  return norm * (systemic_value(risks + t * unit, spec) - base) / t;
}

struct LimitSummary {
  std::array<double, 5> probabilities{0.05, 0.25, 0.5, 0.75, 0.95};
  std::array<double, 5> quantiles{};
  double mean = 0.0;
  double variance = 0.0;
};

/// Symmetric square root V diag(sqrt(lambda)) of a PSD matrix.
inline Matrix psd_factor(const Matrix& cov, const char* module) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cov + cov.transpose()));
  const double tol = 1e-9 * std::max(std::abs(cov.trace()), 0.0);
  if (eig.eigenvalues().size() && eig.eigenvalues().minCoeff() < -tol) {
    throw NumericalError(module, 0, "limit covariance is not positive semidefinite");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

/// Samples the limit max_{zeta in subdiff} <zeta, xi>, xi ~ N(0, limit_cov),
/// through the directional derivative of the aggregation at `risks`.
inline LimitSummary systemic_limit(const SystemicSpec& spec, const Matrix& limit_cov, const Vector& risks,
                                   Eigen::Index samples, std::uint64_t seed) {
  const auto l = spec.weights.size();
  if (limit_cov.rows() != l || limit_cov.cols() != l) throw ConfigError("systemic_limit: covariance must be l x l");
  if (risks.size() != l) throw ConfigError("systemic_limit: risk vector has wrong dimension");
  if (samples < 2) throw ConfigError("systemic_limit: need at least two draws");
  const Matrix factor = psd_factor(limit_cov, "measures");
  std::vector<double> draws(static_cast<std::size_t>(samples));
  Vector z(l);
  for (Eigen::Index s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < l; ++i) z(i) = standard_normal(seed, static_cast<std::uint64_t>(s * l + i));
    draws[static_cast<std::size_t>(s)] = aggregation_directional_derivative(risks, factor * z, spec);
  }
  LimitSummary out;
  out.mean = crf::mean(draws);
  out.variance = population_variance(draws);
  std::sort(draws.begin(), draws.end());
  for (std::size_t q = 0; q < out.probabilities.size(); ++q) out.quantiles[q] = sorted_quantile(draws, out.probabilities[q]);
  return out;
}

/// Joint limit covariance of component estimators on independent samples
/// of sizes n_i, normalized to n = min n_i.
inline Matrix independent_joint_covariance(const std::vector<double>& variances, const std::vector<Eigen::Index>& sizes) {
  if (variances.size() != sizes.size() || variances.empty()) throw ConfigError("joint covariance: size mismatch");
  const Eigen::Index n = *std::min_element(sizes.begin(), sizes.end());
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(variances.size()), static_cast<Eigen::Index>(variances.size()));
  for (std::size_t i = 0; i < variances.size(); ++i) {
    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
        variances[i] * static_cast<double>(n) / static_cast<double>(sizes[i]);
  }
  return out;
}

/// Joint limit covariance of component estimators computed on one shared
/// sample, from their per-observation influence values.
inline Matrix shared_joint_covariance(const std::vector<std::vector<double>>& influences) {
  if (influences.empty()) throw ConfigError("joint covariance: no components");
  const std::size_t n = influences.front().size();
  const auto l = static_cast<Eigen::Index>(influences.size());
  Matrix out(l, l);
  std::vector<double> terms(n);
  for (Eigen::Index a = 0; a < l; ++a) {
    for (Eigen::Index b = a; b < l; ++b) {
      const auto& ia = influences[static_cast<std::size_t>(a)];
      const auto& ib = influences[static_cast<std::size_t>(b)];
      if (ia.size() != n || ib.size() != n) throw ConfigError("joint covariance: influence lengths differ");
      for (std::size_t i = 0; i < n; ++i) terms[i] = ia[i] * ib[i];
      out(a, b) = out(b, a) = pairwise_sum(terms) / static_cast<double>(n);
    }
  }
  return out;
}

}  // namespace crf
