#pragma once

// Plug-in estimates of the delta-method limit of a composite estimator:
// covariance of the stacked layer evaluations, chain matrices built from
// mean layer Jacobians, and the limit covariance C^T Sigma C.

#include "crf/core.hpp"
#include "crf/estimators.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace crf {

struct SigmaEstimate {
  /// blocks[a-1][b-1] is m_{a-1} x m_{b-1}, a, b = 1..k+1.
  std::vector<std::vector<Matrix>> blocks;
  Matrix full;
  double min_eigenvalue = 0.0;
  bool repaired = false;
};

struct ChainMatrices {
  std::vector<Matrix> jacobian_means;  // E[J_j], j = 1..k, m_{j-1} x m_j
  std::vector<Matrix> c_transposed;    // C_r^T, r = 1..k, m_0 x m_r
  Matrix stacked;                      // (I, C_1^T, ..., C_k^T), m_0 x M
  bool finite_differences = false;     // some Jacobian came from central differences
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double half_width = 0.0;
};

struct AsymptoticReport {
  SigmaEstimate sigma;
  ChainMatrices chains;
  Matrix limit_cov;
  Eigen::Index n = 0;
  double level = 0.95;
  std::vector<Interval> intervals;
};

/// Stacked evaluations (f_1(eta_2, x), ..., f_{k+1}(x)) in block order.
inline Vector stacked_layers(const CompositeSpec& spec, const EtaChain& chain, const Vector& x) {
  Vector z(spec.signature.total_dim());
  Eigen::Index offset = 0;
  for (int j = 1; j <= spec.signature.k + 1; ++j) {
    const Vector v = spec.layer(j).evaluate(chain.input_of(j), x);
    z.segment(offset, v.size()) = v;
    offset += v.size();
  }
  return z;
}

namespace detail {

inline SigmaEstimate assemble_sigma(const CompositeSpec& spec, Matrix full) {
  SigmaEstimate out;
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(full, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = full.size() ? eig.eigenvalues().minCoeff() : 0.0;
  const double tol = 1e-9 * std::max(full.trace(), 0.0);
  // Eigen-solver round-off on an exactly singular Gram matrix; left as is.
  const double noise = 1e-12 * std::max(full.trace(), 0.0);
  if (out.min_eigenvalue < -noise) {
    if (out.min_eigenvalue < -tol) {
      throw NumericalError("asymptotics", 0,
                           "covariance estimate is not positive semidefinite (min eigenvalue " +
                               std::to_string(out.min_eigenvalue) + ")");
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> dec(full);
    const Vector clipped = dec.eigenvalues().cwiseMax(0.0);
    full = dec.eigenvectors() * clipped.asDiagonal() * dec.eigenvectors().transpose();
    full = (0.5 * (full + full.transpose())).eval();
    out.repaired = true;
  }
  const auto& dims = spec.signature.dims;
  out.blocks.assign(dims.size(), std::vector<Matrix>(dims.size()));
  Eigen::Index ra = 0;
  for (std::size_t a = 0; a < dims.size(); ++a) {
    Eigen::Index cb = 0;
    for (std::size_t b = 0; b < dims.size(); ++b) {
      out.blocks[a][b] = full.block(ra, cb, dims[a], dims[b]);
      cb += dims[b];
    }
    ra += dims[a];
  }
  out.full = std::move(full);
  return out;
}

inline SigmaEstimate sigma_over(const CompositeSpec& spec, const EtaChain& chain, const PointMeasure& measure) {
  const auto n = static_cast<std::size_t>(measure.size());
  const int dim = spec.signature.total_dim();
  std::vector<Vector> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = stacked_layers(spec, chain, measure.point(static_cast<Eigen::Index>(i)));
    if (!z[i].allFinite()) throw NumericalError("asymptotics", 0, "non-finite layer value at point " + std::to_string(i));
  }
  const Vector centre = measure.mean([&](Eigen::Index i, const Vector&) { return z[static_cast<std::size_t>(i)]; });
  Matrix full(dim, dim);
  std::vector<double> terms(n);
  for (int r = 0; r < dim; ++r) {
    for (int c = r; c < dim; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const double prod = (z[i](r) - centre(r)) * (z[i](c) - centre(c));
        terms[i] = measure.is_empirical() ? prod : measure.weight(static_cast<Eigen::Index>(i)) * prod;
      }
      double s = pairwise_sum(terms);
      if (measure.is_empirical()) s /= static_cast<double>(n);
      full(r, c) = s;
      full(c, r) = s;
    }
  }
  return assemble_sigma(spec, std::move(full));
}

inline ChainMatrices chains_over(const CompositeSpec& spec, const EtaChain& chain, const PointMeasure& measure,
                                 bool allow_finite_differences) {
  ChainMatrices out;
  for (int j = 1; j <= spec.signature.k; ++j) {
    if (!spec.layer(j).jacobian_eta) out.finite_differences = true;
  }
  out.jacobian_means = mean_jacobians(spec, chain, measure, allow_finite_differences);
  const int m0 = spec.signature.output_dim();
  out.stacked = Matrix::Zero(m0, spec.signature.total_dim());
  out.stacked.leftCols(m0) = Matrix::Identity(m0, m0);
  Matrix running = Matrix::Identity(m0, m0);
  Eigen::Index offset = m0;
  for (const Matrix& jac : out.jacobian_means) {
    running = (running * jac).eval();
    out.c_transposed.push_back(running);
    out.stacked.middleCols(offset, running.cols()) = running;
    offset += running.cols();
  }
  return out;
}

}  // namespace detail

/// Population (1/n) covariance of the stacked layer evaluations at the
/// plug-in chain.
inline SigmaEstimate plugin_sigma(const CompositeSpec& spec, const Sample& sample, const EtaChain& chain) {
  detail::check_sample(spec, sample);
  if (sample.n() < 2) throw ConfigError("plugin_sigma: need at least two observations");
  return detail::sigma_over(spec, chain, PointMeasure::empirical(sample.data()));
}

/// Covariance at a chain under the oracle law (quadrature when available).
inline SigmaEstimate exact_sigma(const CompositeSpec& spec, const DistributionOracle& oracle, const EtaChain& chain) {
  require_valid(spec);
  return with_oracle_measure(oracle, [&](const PointMeasure& m) { return detail::sigma_over(spec, chain, m); });
}

inline ChainMatrices chain_matrices(const CompositeSpec& spec, const Sample& sample, const EtaChain& chain,
                                    bool allow_finite_differences = true) {
  detail::check_sample(spec, sample);
  return detail::chains_over(spec, chain, PointMeasure::empirical(sample.data()), allow_finite_differences);
}

inline ChainMatrices exact_chain_matrices(const CompositeSpec& spec, const DistributionOracle& oracle,
                                          const EtaChain& chain, bool allow_finite_differences = true) {
  require_valid(spec);
  return with_oracle_measure(oracle, [&](const PointMeasure& m) {
    return detail::chains_over(spec, chain, m, allow_finite_differences);
  });
}

inline Matrix limit_variance(const SigmaEstimate& sigma, const ChainMatrices& chains) {
  if (chains.stacked.cols() != sigma.full.rows() || sigma.full.rows() != sigma.full.cols()) {
    throw ConfigError("limit_variance: chain matrices and covariance have inconsistent shapes");
  }
  Matrix out = chains.stacked * sigma.full * chains.stacked.transpose();
  return (0.5 * (out + out.transpose())).eval();
}

inline double limit_variance(const SigmaEstimate& sigma, const ChainMatrices& chains, const Vector& contrast) {
  const Matrix cov = limit_variance(sigma, chains);
  if (contrast.size() != cov.rows()) throw ConfigError("limit_variance: contrast has wrong dimension");
  return contrast.dot(cov * contrast);
}

inline double two_sided_z(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  return normal_quantile(0.5 + 0.5 * level);
}

inline std::vector<Interval> confidence_interval(const EstimateReport& estimate, const AsymptoticReport& report,
                                                 double level) {
  const double z = two_sided_z(level);
  if (report.n != estimate.n) throw ConfigError("confidence_interval: sample sizes differ");
  if (report.limit_cov.rows() != estimate.value.size()) throw ConfigError("confidence_interval: dimension mismatch");
  std::vector<Interval> out;
  for (Eigen::Index i = 0; i < estimate.value.size(); ++i) {
    const double var = std::max(report.limit_cov(i, i), 0.0);
    const double hw = z * std::sqrt(var / static_cast<double>(report.n));
    out.push_back({estimate.value(i) - hw, estimate.value(i) + hw, hw});
  }
  return out;
}

/// Sigma, chain matrices and limit covariance at the estimate's own chain,
/// with intervals at `level`.
inline AsymptoticReport asymptotic_report(const CompositeSpec& spec, const Sample& sample,
                                          const EstimateReport& estimate, double level = 0.95) {
  AsymptoticReport report;
  report.sigma = plugin_sigma(spec, sample, estimate.chain);
  report.chains = chain_matrices(spec, sample, estimate.chain);
  report.limit_cov = limit_variance(report.sigma, report.chains);
  report.n = sample.n();
  report.level = level;
  report.intervals = confidence_interval(estimate, report, level);
  return report;
}

/// Per-observation influence values C^T (z_i - mean z) of a scalar
/// functional; their mean square is the plug-in limit variance.
inline std::vector<double> influence_values(const CompositeSpec& spec, const Sample& sample, const EtaChain& chain) {
  detail::check_sample(spec, sample);
  if (spec.signature.output_dim() != 1) throw ConfigError("influence_values: functional must be scalar");
  const ChainMatrices chains = chain_matrices(spec, sample, chain);
  const PointMeasure measure = PointMeasure::empirical(sample.data());
  std::vector<Vector> z(static_cast<std::size_t>(sample.n()));
  for (Eigen::Index i = 0; i < sample.n(); ++i) z[static_cast<std::size_t>(i)] = stacked_layers(spec, chain, measure.point(i));
  const Vector centre = measure.mean([&](Eigen::Index i, const Vector&) { return z[static_cast<std::size_t>(i)]; });
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = (chains.stacked * (z[i] - centre))(0);
  return out;
}

}  // namespace crf
