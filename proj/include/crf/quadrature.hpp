#pragma once

#include "crf/types.hpp"

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace crf {

/// One-dimensional node/weight rule.
struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// Gauss-Legendre rule on [-1, 1], Newton iteration on the three-term
/// recurrence from Chebyshev-like initial guesses.
inline Rule1D gauss_legendre(int n) {
  if (n < 1) throw ConfigError("gauss_legendre: need at least one node");
  Rule1D rule;
  rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
  rule.weights.assign(static_cast<std::size_t>(n), 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = -z;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = z;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return rule;
}

/// Gauss-Legendre rule mapped to [lo, hi].
inline Rule1D gauss_legendre(int n, double lo, double hi) {
  Rule1D rule = gauss_legendre(n);
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  for (std::size_t i = 0; i < rule.size(); ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

/// Gauss-Hermite rule for the weight exp(-x^2), nodes ascending. Golub-Welsch
/// on the symmetric Jacobi matrix, which stays stable for hundreds of nodes.
inline Rule1D gauss_hermite(int n) {
  if (n < 1) throw ConfigError("gauss_hermite: need at least one node");
  Matrix jacobi = Matrix::Zero(n, n);
  for (int j = 1; j < n; ++j) {
    jacobi(j, j - 1) = std::sqrt(0.5 * j);
    jacobi(j - 1, j) = jacobi(j, j - 1);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  if (eig.info() != Eigen::Success) throw NumericalError("quadrature", 0, "Gauss-Hermite eigen-solve failed");
  Rule1D rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const double mu0 = std::sqrt(std::numbers::pi);
  for (int i = 0; i < n; ++i) {
    const double v = eig.eigenvectors()(0, i);
    rule.nodes[static_cast<std::size_t>(i)] = eig.eigenvalues()(i);
    rule.weights[static_cast<std::size_t>(i)] = mu0 * v * v;
  }
  // Exact symmetry about zero.
  for (int i = 0; i < n / 2; ++i) {
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    const double x = 0.5 * (rule.nodes[hi] - rule.nodes[lo]);
    const double w = 0.5 * (rule.weights[hi] + rule.weights[lo]);
    rule.nodes[lo] = -x;
    rule.nodes[hi] = x;
    rule.weights[lo] = w;
    rule.weights[hi] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

/// Rule integrating against the N(mean, std^2) density.
inline Rule1D normal_rule(int n, double mean, double std_dev) {
  Rule1D rule = gauss_hermite(n);
  const double scale = std::numbers::sqrt2 * std_dev;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    rule.nodes[i] = mean + scale * rule.nodes[i];
    rule.weights[i] /= std::sqrt(std::numbers::pi);
  }
  return rule;
}

/// Multivariate node/weight scheme; nodes are rows.
struct QuadratureRule {
  Matrix nodes;
  Vector weights;

  Eigen::Index size() const { return weights.size(); }
  Eigen::Index dimension() const { return nodes.cols(); }
};

/// Tensor product of one-dimensional rules, one per coordinate.
inline QuadratureRule tensor_product(std::span<const Rule1D> rules) {
  if (rules.empty()) throw ConfigError("tensor_product: no rules");
  Eigen::Index total = 1;
  for (const auto& r : rules) total *= static_cast<Eigen::Index>(r.size());
  const auto dim = static_cast<Eigen::Index>(rules.size());
  QuadratureRule out{Matrix(total, dim), Vector(total)};
  std::vector<std::size_t> idx(rules.size(), 0);
  for (Eigen::Index row = 0; row < total; ++row) {
    double w = 1.0;
    for (std::size_t d = 0; d < rules.size(); ++d) {
      out.nodes(row, static_cast<Eigen::Index>(d)) = rules[d].nodes[idx[d]];
      w *= rules[d].weights[idx[d]];
    }
    out.weights(row) = w;
    for (std::size_t d = rules.size(); d-- > 0;) {
      if (++idx[d] < rules[d].size()) break;
      idx[d] = 0;
    }
  }
  return out;
}

inline QuadratureRule to_rule(const Rule1D& r) {
  return tensor_product(std::span<const Rule1D>(&r, 1));
}

}  // namespace crf
