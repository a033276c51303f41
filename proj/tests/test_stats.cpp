#include "crf/quadrature.hpp"
#include "crf/random.hpp"
#include "crf/sampling.hpp"
#include "crf/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace crf;

TEST(Stats, PairwiseSumMatchesNaiveForShortInputs) {
  const std::vector<double> xs{0.1, 0.2, 0.3, 1e16, -1e16, 0.7};
  double naive = 0.0;
  for (double x : xs) naive += x;
  EXPECT_EQ(pairwise_sum(xs), naive);
}

TEST(Stats, PairwiseSumLongInput) {
  std::vector<double> xs(100001, 0.1);
  EXPECT_NEAR(pairwise_sum(xs), 10000.1, 1e-9);
}

TEST(Stats, MeanVarianceStd) {
  const std::vector<double> xs{1.0, 2.0, 3.0};
  EXPECT_DOUBLE_EQ(mean(xs), 2.0);
  EXPECT_NEAR(population_variance(xs), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(sample_std(xs), 1.0, 1e-15);
}

TEST(Stats, QuantileType7) {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(sorted_quantile(xs, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(sorted_quantile(xs, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(sorted_quantile(xs, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(sorted_quantile(xs, 0.25), 1.75);
}

TEST(Stats, NormalQuantileInvertsCdf) {
  for (double p : {1e-10, 1e-5, 0.01, 0.2, 0.5, 0.8, 0.975, 0.99999}) {
    EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-9 * std::max(p, 1e-3)) << p;
  }
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-9);
  EXPECT_NEAR(normal_quantile(0.75), 0.6744897501960817, 1e-9);
}

TEST(Stats, KsDistanceOfExactGrid) {
  // Midpoint quantiles give D = 1/(2R).
  const int r = 1000;
  std::vector<double> xs;
  for (int i = 0; i < r; ++i) xs.push_back(normal_quantile((i + 0.5) / r));
  EXPECT_NEAR(ks_distance(xs, normal_cdf), 0.5 / r, 1e-9);
}

TEST(Stats, KsDistanceDetectsShift) {
  std::vector<double> xs;
  for (int i = 0; i < 1000; ++i) xs.push_back(normal_quantile((i + 0.5) / 1000) + 1.0);
  EXPECT_NEAR(ks_distance(xs, normal_cdf), normal_cdf(0.5) - normal_cdf(-0.5), 2e-3);
}

TEST(Stats, KsCriticalValue) {
  EXPECT_NEAR(ks_critical_value(0.01, 1000), 1.6276 / std::sqrt(1000.0), 1e-4);
  EXPECT_NEAR(ks_critical_value(0.05, 1000), 1.3581 / std::sqrt(1000.0), 1e-4);
}

TEST(Quadrature, GaussLegendreIntegratesPolynomials) {
  const Rule1D r = gauss_legendre(10, 0.0, 2.0);
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], 19);
  EXPECT_NEAR(s, std::pow(2.0, 20) / 20.0, 1e-8);
}

TEST(Quadrature, GaussHermiteMomentsAtLargeNodeCounts) {
  for (int n : {1, 2, 7, 64, 200}) {
    const Rule1D r = normal_rule(n, 0.0, 1.0);
    double m0 = 0.0, m2 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      m0 += r.weights[i];
      m2 += r.weights[i] * r.nodes[i] * r.nodes[i];
      m4 += r.weights[i] * std::pow(r.nodes[i], 4);
    }
    EXPECT_NEAR(m0, 1.0, 1e-12) << n;
    if (n >= 2) {
      EXPECT_NEAR(m2, 1.0, 1e-11) << n;
    }
    if (n >= 3) {
      EXPECT_NEAR(m4, 3.0, 1e-10) << n;
    }
  }
}

TEST(Quadrature, TensorProductWeightsMultiply) {
  const std::vector<Rule1D> rules{gauss_legendre(3), gauss_legendre(4)};
  const QuadratureRule q = tensor_product(rules);
  EXPECT_EQ(q.size(), 12);
  EXPECT_EQ(q.dimension(), 2);
  EXPECT_NEAR(q.weights.sum(), 4.0, 1e-13);
}

TEST(Random, HashIsDeterministicAndSpread) {
  EXPECT_EQ(hash64(42, 7), hash64(42, 7));
  EXPECT_NE(hash64(42, 7), hash64(42, 8));
  EXPECT_NE(hash64(42, 7), hash64(43, 7));
  for (std::uint64_t c = 0; c < 1000; ++c) {
    const double u = to_unit_interval(hash64(1, c));
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Sampling, NormalLawOfLargeNumbers) {
  const Sample s = sample(SamplerConfig{Law::normal(0.0, 1.0), 1, 42}, 100000);
  const auto xs = s.column(0);
  EXPECT_LT(std::abs(mean(xs)), 4.0 / std::sqrt(1e5));
  EXPECT_NEAR(sample_std(xs), 1.0, 0.02);
}

TEST(Sampling, TwoPointMean) {
  const Sample s = sample(SamplerConfig{Law::two_point(0.0, 2.0, 0.5), 1, 42}, 100000);
  EXPECT_NEAR(mean(s.column(0)), 1.0, 0.02);
}

TEST(Sampling, Deterministic) {
  const SamplerConfig cfg{Law::uniform(-1.0, 3.0), 3, 99};
  EXPECT_EQ(sample(cfg, 50).data(), sample(cfg, 50).data());
  // Draw i is a function of (seed, i): prefixes agree.
  EXPECT_EQ(sample(cfg, 10).data(), sample(cfg, 50).data().topRows(10));
}

TEST(Sampling, ParseLaw) {
  const Law a = parse_law("normal_var:10,3");
  EXPECT_DOUBLE_EQ(a.mean(), 10.0);
  EXPECT_NEAR(a.std_dev(), std::sqrt(3.0), 1e-15);
  const Law b = parse_law("product:normal:0,1;uniform:0,2");
  EXPECT_EQ(b.dimension(), 2);
  EXPECT_EQ(b.factor(1).kind, Law::Kind::uniform);
  EXPECT_THROW(parse_law("normal:0"), ConfigError);
  EXPECT_THROW(parse_law("normal:0,-1"), ConfigError);
  EXPECT_THROW(parse_law("uniform:2,1"), ConfigError);
  EXPECT_THROW(parse_law("two_point:0,1,1.5"), ConfigError);
  EXPECT_THROW(parse_law("cauchy:0,1"), ConfigError);
  EXPECT_THROW(parse_law("normal:1x,2"), ConfigError);
}

TEST(Sampling, OracleRulesIntegrateMoments) {
  for (const Law& law : {Law::normal(10.0, std::sqrt(3.0)), Law::uniform(0.0, 1.0), Law::two_point(0.0, 2.0, 0.3)}) {
    const DistributionOracle o = make_oracle(law);
    ASSERT_TRUE(o.quadrature);
    const auto& q = *o.quadrature;
    EXPECT_NEAR(q.weights.sum(), 1.0, 1e-12);
    EXPECT_NEAR(q.weights.dot(q.nodes.col(0)), law.mean(), 1e-10);
    const double var = q.weights.dot((q.nodes.col(0).array() - law.mean()).square().matrix());
    EXPECT_NEAR(var, law.std_dev() * law.std_dev(), 1e-9);
  }
}
