#include "crf/kernels.hpp"
#include "crf/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace crf;

namespace {

const KernelFamily kFamilies[] = {KernelFamily::uniform, KernelFamily::gaussian, KernelFamily::epanechnikov};

// Composite midpoint-free Gauss-Legendre over a wide interval; independent of
// KernelSpec::rule.
template <class F>
double integrate(F f, double lo, double hi, int panels = 2000) {
  const Rule1D base = gauss_legendre(8);
  const double w = (hi - lo) / panels;
  double s = 0.0;
  for (int k = 0; k < panels; ++k) {
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double z = lo + k * w + 0.5 * w * (base.nodes[i] + 1.0);
      s += 0.5 * w * base.weights[i] * f(z);
    }
  }
  return s;
}

}  // namespace

TEST(Kernels, DensityIntegratesToOneAndIsSymmetric) {
  for (KernelFamily f : kFamilies) {
    const KernelSpec k = KernelSpec::make(f);
    const double lo = k.bounded_support() ? -1.0 : -40.0;
    const double hi = -lo;
    EXPECT_NEAR(integrate([&](double z) { return k.density(z); }, lo, hi), 1.0, 1e-8) << to_string(f);
    EXPECT_NEAR(integrate([&](double z) { return z * k.density(z); }, lo, hi), 0.0, 1e-10) << to_string(f);
  }
}

TEST(Kernels, StoredMomentsMatchQuadrature) {
  for (KernelFamily f : kFamilies) {
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
      const KernelSpec k = KernelSpec::make(f, 1, p);
      const double lo = k.bounded_support() ? -1.0 : -40.0;
      const double m1 = integrate([&](double z) { return std::abs(z) * k.density(z); }, lo, -lo);
      const double mp = integrate([&](double z) { return std::pow(std::abs(z), p) * k.density(z); }, lo, -lo);
      EXPECT_NEAR(k.first_moment, m1, 1e-6) << to_string(f);
      EXPECT_NEAR(k.pth_moment, mp, 1e-6) << to_string(f) << " p=" << p;
    }
  }
}

TEST(Kernels, RulesSumToOne) {
  for (KernelFamily f : kFamilies) {
    const Rule1D r = KernelSpec::make(f).rule(64);
    double s = 0.0;
    for (double w : r.weights) s += w;
    EXPECT_NEAR(s, 1.0, 1e-12) << to_string(f);
  }
}

TEST(Kernels, ParseFamily) {
  EXPECT_EQ(parse_kernel_family("epanechnikov"), KernelFamily::epanechnikov);
  EXPECT_THROW(parse_kernel_family("triangle"), ConfigError);
}

TEST(Bandwidth, Examples) {
  EXPECT_DOUBLE_EQ(bandwidth(BandwidthSchedule::silverman(), 1, 1.0), 1.06);
  EXPECT_NEAR(bandwidth(BandwidthSchedule::power(1.0, 0.6), 100, 0.0), 0.063096, 1e-6);
  EXPECT_NEAR(bandwidth(BandwidthSchedule::silverman(), 200, 3.0), 1.06 * 3.0 * std::pow(200.0, -0.2), 1e-15);
  EXPECT_NEAR(bandwidth(BandwidthSchedule::silverman(), 200, 3.0), 1.1022, 1e-4);
  EXPECT_EQ(bandwidth(BandwidthSchedule::none(), 50, 2.0), 0.0);
}

TEST(Bandwidth, PositiveAndNonIncreasing) {
  for (const auto& s : {BandwidthSchedule::silverman(), BandwidthSchedule::power(2.0, 0.6), BandwidthSchedule::power(0.5, 0.2)}) {
    double prev = bandwidth(s, 1, 1.7);
    for (long long n = 2; n < 100000; n = n * 3 / 2 + 1) {
      const double h = bandwidth(s, n, 1.7);
      EXPECT_GT(h, 0.0);
      EXPECT_LE(h, prev);
      prev = h;
    }
  }
}

TEST(Bandwidth, DegenerateSilvermanRejected) {
  EXPECT_THROW(bandwidth(BandwidthSchedule::silverman(), 10, 0.0), DegenerateSmoothing);
  EXPECT_THROW(bandwidth(BandwidthSchedule::silverman(), 0, 1.0), ConfigError);
  EXPECT_THROW(BandwidthSchedule::power(-1.0, 0.5), ConfigError);
}

TEST(Bandwidth, Parse) {
  const BandwidthSchedule s = parse_bandwidth("power:2,0.75");
  EXPECT_EQ(s.rule, BandwidthRule::power);
  EXPECT_DOUBLE_EQ(s.scale, 2.0);
  EXPECT_DOUBLE_EQ(s.exponent, 0.75);
  EXPECT_EQ(parse_bandwidth("silverman").rule, BandwidthRule::silverman);
  EXPECT_EQ(parse_bandwidth("none").rule, BandwidthRule::none);
  EXPECT_THROW(parse_bandwidth("power:2"), ConfigError);
  EXPECT_THROW(parse_bandwidth("power:x,1"), ConfigError);
  EXPECT_THROW(parse_bandwidth("scott"), ConfigError);
}

TEST(StrongIdentity, Examples) {
  const KernelSpec uni = KernelSpec::make(KernelFamily::uniform, 1, 2.0);
  const auto pass = check_strong_identity(BandwidthSchedule::power(1.0, 0.6), uni, 2.0);
  EXPECT_TRUE(pass.pass);
  EXPECT_NEAR(pass.moment_exponent, -0.1, 1e-15);
  EXPECT_TRUE(pass.bandwidth_condition);
  const auto fail = check_strong_identity(BandwidthSchedule::power(1.0, 0.2), uni, 2.0);
  EXPECT_FALSE(fail.pass);
  EXPECT_NEAR(fail.moment_exponent, 0.3, 1e-15);
  EXPECT_FALSE(fail.bandwidth_condition);
  const auto silver = check_strong_identity(BandwidthSchedule::silverman(), uni, 2.0);
  EXPECT_FALSE(silver.pass);
  EXPECT_NEAR(silver.moment_exponent, 0.3, 1e-15);
  const auto none = check_strong_identity(BandwidthSchedule::none(), uni, 2.0);
  EXPECT_TRUE(none.pass);
}

TEST(StrongIdentity, ThresholdAtOneHalf) {
  for (KernelFamily f : kFamilies) {
    for (double p : {1.0, 2.0, 3.0}) {
      const KernelSpec k = KernelSpec::make(f, 1, p);
      for (double g : {0.1, 0.2, 0.45, 0.5, 0.5000001, 0.6, 1.0, 3.0}) {
        const auto d = check_strong_identity(BandwidthSchedule::power(1.3, g), k, p);
        EXPECT_EQ(d.pass, g > 0.5) << to_string(f) << " p=" << p << " g=" << g;
        EXPECT_EQ(d.bandwidth_condition, g > 0.5);
      }
    }
  }
}
