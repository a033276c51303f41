#pragma once

// Composite functional data model:
//
//   rho[X] = E[ f_1( E[ f_2( ... E[ f_{k+1}(X) ] ..., X) ], X) ]
//
// Layer j maps (eta in R^{m_j}, x in R^m) to R^{m_{j-1}}; the innermost layer
// k+1 ignores eta and maps x to R^{m_k}. Everything below indexes layers from
// 1 to k+1 as in that formula.

#include "crf/quadrature.hpp"
#include "crf/stats.hpp"
#include "crf/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace crf {

struct DimSignature {
  int m = 1;              // dimension of X
  int k = 0;              // number of inner layers
  std::vector<int> dims;  // m_0, ..., m_k

  int output_dim() const { return dims.front(); }
  /// Output dimension of layer j, i.e. m_{j-1}.
  int layer_output_dim(int j) const { return dims[static_cast<std::size_t>(j - 1)]; }
  /// Dimension of the eta argument of layer j (m_j); 0 for layer k+1.
  int layer_input_dim(int j) const {
    return j == k + 1 ? 0 : dims[static_cast<std::size_t>(j)];
  }
  /// M = m_0 + ... + m_k.
  int total_dim() const {
    int s = 0;
    for (int d : dims) s += d;
    return s;
  }
};

struct LipschitzBound {
  double constant = 0.0;
  double growth_order = 0.0;
};

/// Per-coordinate box used only to place probe points.
struct Box {
  Vector lower;
  Vector upper;
};

/// Tag for layers of the form (max(0, scale * x[coordinate] - threshold(eta)))^power.
/// Lets smoothed estimators use the closed-form uniform-kernel convolution.
struct PowerMaxForm {
  Eigen::Index coordinate = 0;
  double scale = 1.0;
  std::function<double(const Vector& eta)> threshold;
  double power = 2.0;
};

using LayerEval = std::function<Vector(const Vector& eta, const Vector& x)>;
using LayerJacobian = std::function<Matrix(const Vector& eta, const Vector& x)>;

struct LayerFn {
  int index = 1;
  LayerEval evaluate;
  std::optional<LayerJacobian> jacobian_eta;
  std::optional<LipschitzBound> lipschitz;
  std::optional<PowerMaxForm> power_max;
  std::optional<Box> eta_box;
};

struct CompositeSpec {
  DimSignature signature;
  std::vector<LayerFn> layers;  // f_1 ... f_{k+1}
  std::string label;

  int depth() const { return signature.k; }
  const LayerFn& layer(int j) const { return layers.at(static_cast<std::size_t>(j - 1)); }
};

/// Per-layer means eta_bar_j for j = 1..k+1, stored by layer index
/// (levels[j-1] = eta_bar_j). value() is eta_bar_1.
struct EtaChain {
  std::vector<Vector> levels;

  const Vector& at(int j) const { return levels.at(static_cast<std::size_t>(j - 1)); }
  const Vector& value() const { return levels.front(); }
  /// eta argument fed into layer j: eta_bar_{j+1}, or empty for layer k+1.
  Vector input_of(int j) const {
    return static_cast<std::size_t>(j) < levels.size() ? levels[static_cast<std::size_t>(j)] : Vector();
  }
};

/// Finite measure used to take layer means: either the empirical measure of
/// a sample (weights 1/n, applied as sum / n) or a weighted node set.
class PointMeasure {
 public:
  static PointMeasure empirical(const Matrix& data) { return PointMeasure(&data, std::nullopt); }
  static PointMeasure weighted(const QuadratureRule& rule) {
    return PointMeasure(&rule.nodes, rule.weights);
  }

  Eigen::Index size() const { return points_->rows(); }
  Eigen::Index dimension() const { return points_->cols(); }
  Vector point(Eigen::Index i) const { return points_->row(i).transpose(); }
  bool is_empirical() const { return !weights_.has_value(); }
  double weight(Eigen::Index i) const {
    return weights_ ? (*weights_)(i) : 1.0 / static_cast<double>(size());
  }

  /// Mean of f over the measure; f(i, x_i) returns a Vector or Matrix.
  template <class F>
  auto mean(F&& f) const {
    const auto n = static_cast<std::size_t>(size());
    if (!weights_) {
      auto s = pairwise_accumulate(std::size_t{0}, n, [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        return f(row, point(row)).eval();
      });
      return (s / static_cast<double>(n)).eval();
    }
    auto s = pairwise_accumulate(std::size_t{0}, n, [&](std::size_t i) {
      const auto row = static_cast<Eigen::Index>(i);
      return ((*weights_)(row) * f(row, point(row))).eval();
    });
    return s;
  }

 private:
  PointMeasure(const Matrix* points, std::optional<Vector> weights)
      : points_(points), weights_(std::move(weights)) {}

  const Matrix* points_;
  std::optional<Vector> weights_;
};

using Sampler = std::function<Matrix(std::uint64_t seed, Eigen::Index count)>;

/// Stand-in for the law of X: a deterministic sampler plus, when available,
/// a quadrature scheme integrating against the law.
struct DistributionOracle {
  Sampler sampler;
  std::optional<QuadratureRule> quadrature;
  Eigen::Index fallback_count = 200000;
  std::uint64_t fallback_seed = 0;
  int dimension = 1;
};

/// Perturbation direction d = (d_1, ..., d_k, d_{k+1}).
struct Direction {
  using Term = std::function<Vector(const Vector& eta)>;
  std::vector<Term> layer_terms;  // d_1 ... d_k
  Vector innermost;               // d_{k+1}

  /// Flat direction from constant vectors (d_1, ..., d_{k+1}).
  static Direction constant(std::vector<Vector> d) {
    if (d.empty()) throw ConfigError("Direction::constant: empty direction");
    Direction out;
    out.innermost = d.back();
    for (std::size_t j = 0; j + 1 < d.size(); ++j) {
      out.layer_terms.emplace_back([v = d[j]](const Vector&) { return v; });
    }
    return out;
  }
};

struct DimMismatch {
  int outer_layer = 0;  // layer whose eta input is fed
  int inner_layer = 0;  // layer producing it
  int expected = 0;
  int actual = 0;
  std::string message;
};

struct ValidationResult {
  std::vector<DimMismatch> mismatches;

  bool ok() const { return mismatches.empty(); }
};

namespace detail {

inline Vector probe_eta(const LayerFn& layer, int dim) {
  if (layer.eta_box && layer.eta_box->lower.size() == dim) {
    return 0.5 * (layer.eta_box->lower + layer.eta_box->upper);
  }
  return Vector::Ones(dim);
}

}  // namespace detail

inline ValidationResult validate_spec(const CompositeSpec& spec) {
  ValidationResult result;
  const auto& sig = spec.signature;
  auto add = [&](int outer, int inner, int expected, int actual, std::string msg) {
    result.mismatches.push_back({outer, inner, expected, actual, std::move(msg)});
  };
  if (sig.m < 1) add(0, 0, 1, sig.m, "dimension m of X must be positive");
  if (sig.k < 0) add(0, 0, 0, sig.k, "number of inner layers k must be non-negative");
  if (static_cast<int>(sig.dims.size()) != sig.k + 1) {
    add(0, 0, sig.k + 1, static_cast<int>(sig.dims.size()), "dims must have k+1 entries");
    return result;
  }
  for (std::size_t i = 0; i < sig.dims.size(); ++i) {
    if (sig.dims[i] < 1) add(static_cast<int>(i), static_cast<int>(i) + 1, 1, sig.dims[i], "layer dimension must be positive");
  }
  if (static_cast<int>(spec.layers.size()) != sig.k + 1) {
    add(0, 0, sig.k + 1, static_cast<int>(spec.layers.size()), "layers must have k+1 entries");
    return result;
  }
  if (!result.ok()) return result;

  const Vector x = Vector::Zero(sig.m);
  for (int j = 1; j <= sig.k + 1; ++j) {
    const LayerFn& layer = spec.layer(j);
    if (layer.index != j) {
      add(j, j, j, layer.index, "layer indices must be consecutive from 1");
      continue;
    }
    if (!layer.evaluate) {
      add(j - 1, j, sig.layer_output_dim(j), 0, "layer has no evaluator");
      continue;
    }
    const int in_dim = sig.layer_input_dim(j);
    const Vector eta = detail::probe_eta(layer, in_dim);
    const int expected = sig.layer_output_dim(j);
    int actual = -1;
    try {
      actual = static_cast<int>(layer.evaluate(eta, x).size());
    } catch (const std::exception& e) {
      add(j - 1, j, expected, -1, std::string("evaluation failed: ") + e.what());
      continue;
    }
    if (actual != expected) {
      std::ostringstream os;
      os << "layer " << j << " returns dimension " << actual << " but "
         << (j == 1 ? std::string("the functional output") : "layer " + std::to_string(j - 1) + " eta input")
         << " expects " << expected;
      add(j - 1, j, expected, actual, os.str());
    }
    if (layer.jacobian_eta && j <= sig.k) {
      const Matrix jac = (*layer.jacobian_eta)(eta, x);
      if (jac.rows() != expected || jac.cols() != in_dim) {
        std::ostringstream os;
        os << "layer " << j << " Jacobian is " << jac.rows() << "x" << jac.cols() << ", expected "
           << expected << "x" << in_dim;
        add(j, j, expected * in_dim, static_cast<int>(jac.size()), os.str());
      }
    }
  }
  return result;
}

inline void require_valid(const CompositeSpec& spec) {
  const auto v = validate_spec(spec);
  if (!v.ok()) throw ConfigError("invalid composite spec '" + spec.label + "': " + v.mismatches.front().message);
}

/// Central differences with per-coordinate step max(1e-6, 1e-6*|eta_i|).
inline Matrix finite_difference_jacobian(const LayerFn& layer, const Vector& eta, const Vector& x) {
  const Vector f0 = layer.evaluate(eta, x);
  Matrix jac(f0.size(), eta.size());
  Vector probe = eta;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double h = std::max(1e-6, 1e-6 * std::abs(eta(i)));
    probe(i) = eta(i) + h;
    const Vector fp = layer.evaluate(probe, x);
    probe(i) = eta(i) - h;
    const Vector fm = layer.evaluate(probe, x);
    probe(i) = eta(i);
    jac.col(i) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

/// Jacobian in eta: the declared one, or central differences when allowed.
inline Matrix layer_jacobian(const LayerFn& layer, const Vector& eta, const Vector& x,
                             bool allow_finite_differences) {
  if (layer.jacobian_eta) return (*layer.jacobian_eta)(eta, x);
  if (!allow_finite_differences) {
    throw NumericalError("core", layer.index, "layer " + std::to_string(layer.index) + " has no Jacobian");
  }
  return finite_difference_jacobian(layer, eta, x);
}

namespace detail {

/// Evaluates the chain innermost-first; layer_mean(j, eta_in) returns the
/// mean of layer j at eta_in.
template <class LayerMean>
EtaChain nest(const CompositeSpec& spec, LayerMean&& layer_mean) {
  const int k = spec.signature.k;
  EtaChain chain;
  chain.levels.resize(static_cast<std::size_t>(k + 1));
  Vector eta;
  for (int j = k + 1; j >= 1; --j) {
    eta = layer_mean(j, eta);
    chain.levels[static_cast<std::size_t>(j - 1)] = eta;
  }
  return chain;
}

/// Plain mean of layer j over a point measure, reporting the first
/// non-finite evaluation.
inline Vector layer_mean(const CompositeSpec& spec, int j, const Vector& eta, const PointMeasure& measure,
                         const char* module) {
  const LayerFn& layer = spec.layer(j);
  Vector out = measure.mean([&](Eigen::Index i, const Vector& x) {
    Vector v = layer.evaluate(eta, x);
    if (!v.allFinite()) {
      throw NumericalError(module, j,
                           "non-finite output of layer " + std::to_string(j) + " at point " + std::to_string(i));
    }
    return v;
  });
  if (!out.allFinite()) throw NumericalError(module, j, "non-finite mean of layer " + std::to_string(j));
  return out;
}

inline EtaChain chain_over(const CompositeSpec& spec, const PointMeasure& measure, const char* module) {
  return nest(spec, [&](int j, const Vector& eta) { return layer_mean(spec, j, eta, measure, module); });
}

}  // namespace detail

/// Runs f with a PointMeasure integrating against the oracle's law: its
/// quadrature when present, else a large seeded sample.
template <class F>
auto with_oracle_measure(const DistributionOracle& oracle, F&& f) {
  if (oracle.quadrature) return f(PointMeasure::weighted(*oracle.quadrature));
  if (!oracle.sampler) throw ConfigError("distribution oracle has neither quadrature nor sampler");
  const Matrix points = oracle.sampler(oracle.fallback_seed, oracle.fallback_count);
  return f(PointMeasure::empirical(points));
}

/// Exact nested means eta_bar_j against the oracle law, innermost first.
inline EtaChain eval_exact_chain(const CompositeSpec& spec, const DistributionOracle& oracle) {
  require_valid(spec);
  return with_oracle_measure(oracle, [&](const PointMeasure& measure) {
    return detail::chain_over(spec, measure, "core");
  });
}

/// Mean Jacobians E[J_j(eta_bar_{j+1}, X)] for j = 1..k over a measure.
inline std::vector<Matrix> mean_jacobians(const CompositeSpec& spec, const EtaChain& chain,
                                          const PointMeasure& measure, bool allow_finite_differences) {
  const int k = spec.signature.k;
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int j = 1; j <= k; ++j) {
    const LayerFn& layer = spec.layer(j);
    const Vector eta = chain.input_of(j);
    if (!layer.jacobian_eta && !allow_finite_differences) {
      throw NumericalError("core", j, "layer " + std::to_string(j) + " has no Jacobian");
    }
    Matrix mean = measure.mean([&](Eigen::Index, const Vector& x) {
      return layer_jacobian(layer, eta, x, allow_finite_differences);
    });
    if (!mean.allFinite()) throw NumericalError("core", j, "non-finite mean Jacobian");
    out.push_back(std::move(mean));
  }
  return out;
}

/// xi_{k+1} = d_{k+1}; xi_j = E[J_j] xi_{j+1} + d_j(eta_bar_{j+1}); returns xi_1.
inline Vector propagate_direction(const CompositeSpec& spec, const EtaChain& chain,
                                  const DistributionOracle& oracle, const Direction& dir) {
  const int k = spec.signature.k;
  if (static_cast<int>(dir.layer_terms.size()) != k) {
    throw ConfigError("propagate_direction: direction has wrong number of layer terms");
  }
  if (dir.innermost.size() != spec.signature.dims.back()) {
    throw ConfigError("propagate_direction: innermost direction has wrong dimension");
  }
  for (int j = 1; j <= k; ++j) {
    if (!spec.layer(j).jacobian_eta) {
      throw NumericalError("core", j, "propagate_direction: layer " + std::to_string(j) + " has no Jacobian");
    }
  }
  const auto jac = with_oracle_measure(oracle, [&](const PointMeasure& measure) {
    return mean_jacobians(spec, chain, measure, false);
  });
  Vector xi = dir.innermost;
  for (int j = k; j >= 1; --j) {
    const Vector d = dir.layer_terms[static_cast<std::size_t>(j - 1)](chain.input_of(j));
    xi = jac[static_cast<std::size_t>(j - 1)] * xi + d;
  }
  return xi;
}

}  // namespace crf
