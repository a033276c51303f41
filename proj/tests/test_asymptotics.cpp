#include "crf/asymptotics.hpp"
#include "crf/measures.hpp"
#include "crf/sampling.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace crf;

namespace {

// Covariance of explicitly stacked per-observation evaluations, written
// with plain loops.
Matrix naive_stacked_covariance(const CompositeSpec& spec, const Sample& s, const EtaChain& chain) {
  const int n = static_cast<int>(s.n());
  const int dim = spec.signature.total_dim();
  Matrix z(n, dim);
  for (int i = 0; i < n; ++i) {
    int col = 0;
    for (int j = 1; j <= spec.signature.k + 1; ++j) {
      const Vector eta = j <= spec.signature.k ? chain.at(j + 1) : Vector();
      const Vector v = spec.layer(j).evaluate(eta, s.data().row(i).transpose());
      for (Eigen::Index q = 0; q < v.size(); ++q) z(i, col++) = v(q);
    }
  }
  Matrix cov(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) {
      double mr = 0.0, mc = 0.0;
      for (int i = 0; i < n; ++i) mr += z(i, r);
      for (int i = 0; i < n; ++i) mc += z(i, c);
      mr /= n;
      mc /= n;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += (z(i, r) - mr) * (z(i, c) - mc);
      cov(r, c) = acc / n;
    }
  }
  return cov;
}

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

CompositeSpec linear_spec(const Matrix& a1, const Matrix& a2) {
  CompositeSpec spec;
  spec.signature = {2, 2, {2, 2, 2}};
  LayerFn f1, f2, f3;
  f1.index = 1;
  f1.evaluate = [a1](const Vector& eta, const Vector& x) { return (a1 * eta + x).eval(); };
  f1.jacobian_eta = [a1](const Vector&, const Vector&) { return a1; };
  f2.index = 2;
  f2.evaluate = [a2](const Vector& eta, const Vector& x) { return (a2 * eta - x).eval(); };
  f2.jacobian_eta = [a2](const Vector&, const Vector&) { return a2; };
  f3.index = 3;
  f3.evaluate = [](const Vector&, const Vector& x) { return x; };
  spec.layers = {f1, f2, f3};
  return spec;
}

CompositeSpec identity_coordinates(int m) {
  CompositeSpec spec;
  spec.signature = {m, 0, {m}};
  LayerFn f1;
  f1.index = 1;
  f1.evaluate = [](const Vector&, const Vector& x) { return x; };
  spec.layers = {f1};
  return spec;
}

}  // namespace

TEST(Sigma, ConstantSampleIsZero) {
  const auto spec = make_mean_semideviation({});
  const Sample s(Matrix::Constant(7, 1, 2.0));
  const auto est = estimate_empirical(spec, s);
  EXPECT_TRUE(plugin_sigma(spec, s, est.chain).full.isZero(0.0));
}

TEST(Sigma, K0PopulationVariance) {
  const auto spec = make_mean(1);
  const Sample s = Sample::from_values({1.0, 2.0, 3.0});
  const auto sig = plugin_sigma(spec, s, estimate_empirical(spec, s).chain);
  EXPECT_NEAR(sig.full(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(limit_variance(sig, chain_matrices(spec, s, estimate_empirical(spec, s).chain))(0, 0), 2.0 / 3.0, 1e-15);
}

TEST(Sigma, MatchesBruteForceStacking) {
  const auto spec = make_mean_semideviation({});
  const Sample s = Sample::from_values({0.3, -1.2, 2.5, 0.0, 4.1});
  const auto est = estimate_empirical(spec, s);
  const auto sig = plugin_sigma(spec, s, est.chain);
  EXPECT_EQ(sig.full, naive_stacked_covariance(spec, s, est.chain));
  EXPECT_EQ(sig.blocks.size(), 3u);
  EXPECT_EQ(sig.blocks[0][2](0, 0), sig.full(0, 2));
}

TEST(Sigma, VectorLayersMatchBruteForce) {
  const auto spec = linear_spec(mat2(1, 0.5, -0.2, 2), mat2(0.3, 1, 1, -1));
  Matrix data(6, 2);
  data << 1, 2, 0, -1, 3, 3, -2, 0.5, 1.5, 1, 0.2, -0.7;
  const Sample s(data);
  const auto est = estimate_empirical(spec, s);
  const auto sig = plugin_sigma(spec, s, est.chain);
  EXPECT_EQ(sig.full, naive_stacked_covariance(spec, s, est.chain));
  EXPECT_LT((sig.full - sig.full.transpose()).norm(), 1e-12);
  EXPECT_GE(sig.min_eigenvalue, -1e-9 * sig.full.trace());
}

TEST(Sigma, NeedsTwoObservations) {
  const auto spec = make_mean(1);
  const Sample s = Sample::from_values({1.0});
  EXPECT_THROW(plugin_sigma(spec, s, estimate_empirical(spec, s).chain), ConfigError);
}

TEST(Chains, IdentityLayers) {
  const auto spec = pad_to_depth(make_mean(1), 3);
  const Sample s = Sample::from_values({1.0, 4.0, -2.0});
  const auto cm = chain_matrices(spec, s, estimate_empirical(spec, s).chain);
  ASSERT_EQ(cm.c_transposed.size(), 3u);
  for (const auto& c : cm.c_transposed) EXPECT_EQ(c, Matrix::Identity(1, 1));
}

TEST(Chains, LinearLayersExactProducts) {
  const Matrix a1 = mat2(1, 0.5, -0.2, 2);
  const Matrix a2 = mat2(0.3, 1, 1, -1);
  const auto spec = linear_spec(a1, a2);
  Matrix data(3, 2);
  data << 1, 2, 0, -1, 3, 3;
  const Sample s(data);
  const auto cm = chain_matrices(spec, s, estimate_empirical(spec, s).chain);
  // Mean of a constant Jacobian over n points rounds at the last bit.
  EXPECT_TRUE(cm.c_transposed[0].isApprox(a1, 1e-14));
  EXPECT_TRUE(cm.c_transposed[1].isApprox(a1 * a2, 1e-14));
  EXPECT_EQ(cm.c_transposed[1], cm.c_transposed[0] * cm.jacobian_means[1]);
  EXPECT_EQ(cm.stacked.cols(), 6);
  EXPECT_EQ(cm.stacked.leftCols(2), Matrix::Identity(2, 2));
  EXPECT_FALSE(cm.finite_differences);
}

TEST(Chains, MeanSemideviationJacobianMatchesFiniteDifference) {
  MeasureParams p;
  const auto spec = make_mean_semideviation(p);
  const Sample s = sample(SamplerConfig{Law::normal(10.0, std::sqrt(3.0)), 1, 21}, 300);
  const auto est = estimate_empirical(spec, s);
  const auto cm = chain_matrices(spec, s, est.chain);
  const double eta2 = est.chain.at(2)(0);
  EXPECT_NEAR(cm.jacobian_means[0](0, 0), p.kappa / p.p * std::pow(eta2, 1.0 / p.p - 1.0), 1e-14);
  const double h = 1e-6 * eta2;
  auto layer1_mean = [&](double eta) {
    Vector e(1);
    e << eta;
    double acc = 0.0;
    for (double x : s.column(0)) acc += spec.layer(1).evaluate(e, Vector::Constant(1, x))(0);
    return acc / static_cast<double>(s.n());
  };
  const double fd = (layer1_mean(eta2 + h) - layer1_mean(eta2 - h)) / (2 * h);
  EXPECT_NEAR(cm.jacobian_means[0](0, 0), fd, 1e-5);
}

TEST(Chains, FiniteDifferenceFallback) {
  auto spec = make_mean_semideviation({});
  spec.layers[0].jacobian_eta.reset();
  const Sample s = Sample::from_values({0.0, 1.0, 5.0});
  const auto est = estimate_empirical(spec, s);
  const auto cm = chain_matrices(spec, s, est.chain, true);
  EXPECT_TRUE(cm.finite_differences);
  EXPECT_NEAR(cm.jacobian_means[0](0, 0), 0.25 / std::sqrt(est.chain.at(2)(0)), 1e-6);
  EXPECT_THROW(chain_matrices(spec, s, est.chain, false), NumericalError);
}

TEST(LimitVariance, IndependentComponentsContrast) {
  const auto spec = identity_coordinates(2);
  Matrix data(4, 2);
  data << 1, 1, -1, 1, 1, -1, -1, -1;
  const Sample s(data);
  const auto est = estimate_empirical(spec, s);
  const auto sig = plugin_sigma(spec, s, est.chain);
  const auto cm = chain_matrices(spec, s, est.chain);
  Vector w(2);
  w << 1, -1;
  EXPECT_NEAR(limit_variance(sig, cm, w), 2.0 * limit_variance(sig, cm)(0, 0), 1e-15);
}

TEST(LimitVariance, ContrastConsistency) {
  const auto spec = linear_spec(mat2(1, 0.5, -0.2, 2), mat2(0.3, 1, 1, -1));
  const Sample s = sample(SamplerConfig{Law::normal(0.0, 1.0), 2, 5}, 40);
  const auto est = estimate_empirical(spec, s);
  const auto sig = plugin_sigma(spec, s, est.chain);
  const auto cm = chain_matrices(spec, s, est.chain);
  Vector w(2);
  w << 0.3, -1.7;
  const Matrix full = limit_variance(sig, cm);
  EXPECT_NEAR(limit_variance(sig, cm, w), w.dot(full * w), 1e-12);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(full);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  EXPECT_THROW(limit_variance(sig, cm, Vector::Ones(3)), ConfigError);
}

TEST(LimitVariance, ExactMeanSemideviationMatchesInfluenceVariance) {
  const auto spec = make_mean_semideviation({});
  const Sample s = sample(SamplerConfig{Law::normal(10.0, std::sqrt(3.0)), 1, 2}, 500);
  const auto est = estimate_empirical(spec, s);
  const auto infl = influence_values(spec, s, est.chain);
  double ms = 0.0;
  for (double v : infl) ms += v * v;
  ms /= static_cast<double>(infl.size());
  const auto rep = asymptotic_report(spec, s, est);
  EXPECT_NEAR(rep.limit_cov(0, 0), ms, 1e-10 * ms);
}

TEST(ConfidenceInterval, Examples) {
  EstimateReport est;
  est.value = Vector::Constant(1, 5.0);
  est.n = 100;
  AsymptoticReport rep;
  rep.n = 100;
  rep.limit_cov = Matrix::Constant(1, 1, 4.0);
  auto ci = confidence_interval(est, rep, 0.95);
  EXPECT_NEAR(ci[0].half_width, 0.392, 1e-3);
  EXPECT_NEAR(ci[0].half_width, 1.959963984540054 * 0.2, 1e-8);
  EXPECT_NEAR(ci[0].lower, 5.0 - ci[0].half_width, 1e-15);
  ci = confidence_interval(est, rep, 0.5);
  EXPECT_NEAR(ci[0].half_width, 0.6744897501960817 * 0.2, 1e-8);
  rep.limit_cov(0, 0) = 0.0;
  ci = confidence_interval(est, rep, 0.9);
  EXPECT_EQ(ci[0].half_width, 0.0);
  EXPECT_THROW(confidence_interval(est, rep, 1.0), ConfigError);
  EXPECT_THROW(confidence_interval(est, rep, 0.0), ConfigError);
}

TEST(Sigma, PsdRepairClipsTinyNegatives) {
  Matrix m(2, 2);
  m << 1.0, 1.0, 1.0, 1.0 - 1e-10;
  const auto spec = identity_coordinates(2);
  const SigmaEstimate sig = detail::assemble_sigma(spec, m);
  EXPECT_TRUE(sig.repaired);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(sig.full);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-14);
  Matrix bad(2, 2);
  bad << 1.0, 0.0, 0.0, -0.5;
  EXPECT_THROW(detail::assemble_sigma(spec, bad), NumericalError);
}
