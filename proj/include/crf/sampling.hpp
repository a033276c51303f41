#pragma once

#include "crf/core.hpp"
#include "crf/estimators.hpp"
#include "crf/quadrature.hpp"
#include "crf/random.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace crf {

/// Law of X: a scalar law (optionally repeated iid over coordinates) or a
/// product of scalar laws, one per coordinate.
struct Law {
  enum class Kind { normal, uniform, two_point, product };

  Kind kind = Kind::normal;
  double a = 0.0;  // normal: mean, uniform: lower, two_point: x1
  double b = 1.0;  // normal: std,  uniform: upper, two_point: x2
  double w = 0.5;  // two_point: probability of x1
  std::vector<Law> factors;

  static Law normal(double mean, double std_dev) {
    if (!(std_dev > 0.0)) throw ConfigError("normal law needs std > 0");
    return {Kind::normal, mean, std_dev, 0.0, {}};
  }
  static Law uniform(double lo, double hi) {
    if (!(lo < hi)) throw ConfigError("uniform law needs a < b");
    return {Kind::uniform, lo, hi, 0.0, {}};
  }
  static Law two_point(double x1, double x2, double prob) {
    if (!(prob > 0.0 && prob < 1.0)) throw ConfigError("two-point law needs w in (0, 1)");
    return {Kind::two_point, x1, x2, prob, {}};
  }
  static Law product(std::vector<Law> factors) {
    if (factors.empty()) throw ConfigError("product law needs factors");
    for (const auto& f : factors) {
      if (f.kind == Kind::product) throw ConfigError("nested product laws are not supported");
    }
    return {Kind::product, 0.0, 0.0, 0.0, std::move(factors)};
  }

  int dimension() const { return kind == Kind::product ? static_cast<int>(factors.size()) : 1; }

  /// Law of coordinate j.
  const Law& factor(int j) const { return kind == Kind::product ? factors.at(static_cast<std::size_t>(j)) : *this; }

  double mean() const {
    switch (kind) {
      case Kind::normal: return a;
      case Kind::uniform: return 0.5 * (a + b);
      case Kind::two_point: return w * a + (1.0 - w) * b;
      case Kind::product: break;
    }
    throw ConfigError("mean of a product law is a vector");
  }

  double std_dev() const {
    switch (kind) {
      case Kind::normal: return b;
      case Kind::uniform: return (b - a) / std::sqrt(12.0);
      case Kind::two_point: return std::abs(a - b) * std::sqrt(w * (1.0 - w));
      case Kind::product: break;
    }
    throw ConfigError("std of a product law is a vector");
  }

  /// Scalar draw from a unit-interval variate.
  double draw(double unit) const {
    switch (kind) {
      case Kind::normal: return a + b * normal_quantile(unit);
      case Kind::uniform: return a + (b - a) * unit;
      case Kind::two_point: return unit < w ? a : b;
      case Kind::product: break;
    }
    throw ConfigError("draw on a product law needs a coordinate");
  }

  Rule1D rule(int nodes) const {
    switch (kind) {
      case Kind::normal: return normal_rule(nodes, a, b);
      case Kind::uniform: {
        Rule1D r = gauss_legendre(nodes, a, b);
        for (double& wt : r.weights) wt /= (b - a);
        return r;
      }
      case Kind::two_point: return Rule1D{{a, b}, {w, 1.0 - w}};
      case Kind::product: break;
    }
    throw ConfigError("rule on a product law needs a coordinate");
  }

  /// Composite Gauss-Legendre rule (panels x order nodes) against the law;
  /// normal laws are truncated at 12 std. Resolves kinks that a single
  /// global rule smears.
  Rule1D composite_rule(int panels, int order = 5) const {
    double lo = a;
    double hi = b;
    switch (kind) {
      case Kind::normal:
        lo = a - 12.0 * b;
        hi = a + 12.0 * b;
        break;
      case Kind::uniform: break;
      case Kind::two_point: return rule(2);
      case Kind::product: throw ConfigError("rule on a product law needs a coordinate");
    }
    const Rule1D base = gauss_legendre(order);
    Rule1D out;
    const double width = (hi - lo) / panels;
    double total = 0.0;
    for (int k = 0; k < panels; ++k) {
      const double left = lo + k * width;
      for (std::size_t i = 0; i < base.size(); ++i) {
        const double x = left + 0.5 * width * (base.nodes[i] + 1.0);
        const double dens = kind == Kind::normal ? std::exp(-0.5 * (x - a) * (x - a) / (b * b)) / (b * std::sqrt(2.0 * std::numbers::pi))
                                                 : 1.0 / (b - a);
        out.nodes.push_back(x);
        out.weights.push_back(0.5 * width * base.weights[i] * dens);
        total += out.weights.back();
      }
    }
    for (double& wt : out.weights) wt /= total;
    return out;
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind) {
      case Kind::normal: os << "normal:" << a << "," << b; break;
      case Kind::uniform: os << "uniform:" << a << "," << b; break;
      case Kind::two_point: os << "two_point:" << a << "," << b << "," << w; break;
      case Kind::product:
        os << "product:";
        for (std::size_t i = 0; i < factors.size(); ++i) os << (i ? ";" : "") << factors[i].describe();
        break;
    }
    return os.str();
  }
};

namespace detail {

inline std::vector<double> parse_numbers(const std::string& text, const std::string& whole) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw ConfigError("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("cannot parse law '" + whole + "'");
    }
  }
  return out;
}

}  // namespace detail

/// Parses normal:MEAN,STD | normal_var:MEAN,VAR | uniform:A,B |
/// two_point:X1,X2,W | product:LAW;LAW;...
inline Law parse_law(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("law '" + text + "' must look like kind:params");
  const std::string kind = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  if (kind == "product") {
    std::vector<Law> factors;
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ';')) factors.push_back(parse_law(item));
    return Law::product(std::move(factors));
  }
  const auto v = detail::parse_numbers(rest, text);
  auto need = [&](std::size_t k) {
    if (v.size() != k) throw ConfigError("law '" + text + "' needs " + std::to_string(k) + " parameters");
  };
  if (kind == "normal") {
    need(2);
    return Law::normal(v[0], v[1]);
  }
  if (kind == "normal_var") {
    need(2);
    if (!(v[1] > 0.0)) throw ConfigError("normal_var needs a positive variance");
    return Law::normal(v[0], std::sqrt(v[1]));
  }
  if (kind == "uniform") {
    need(2);
    return Law::uniform(v[0], v[1]);
  }
  if (kind == "two_point") {
    need(3);
    return Law::two_point(v[0], v[1], v[2]);
  }
  throw ConfigError("unknown law kind '" + kind + "'");
}

struct SamplerConfig {
  Law law;
  int dimension = 1;  // iid copies of a scalar law; ignored for product laws
  std::uint64_t seed = 0;

  int m() const { return law.kind == Law::Kind::product ? law.dimension() : dimension; }
};

/// Draw (i, j) is a pure function of (seed, i * m + j).
inline Sample sample(const SamplerConfig& config, Eigen::Index n) {
  if (n < 1) throw ConfigError("sample: n must be positive");
  const int m = config.m();
  if (m < 1) throw ConfigError("sample: dimension must be positive");
  Matrix data(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const auto counter = static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(m) + static_cast<std::uint64_t>(j);
      data(i, j) = config.law.factor(config.law.kind == Law::Kind::product ? j : 0)
                       .draw(to_unit_interval(hash64(config.seed, counter)));
    }
  }
  return Sample(std::move(data));
}

/// Oracle for the law plus the counter-based sampler. Scalar laws get a
/// composite Gauss-Legendre rule (scalar_panels x 5 nodes); multivariate
/// laws a tensor of per-coordinate rules (Gauss-Hermite for normals) with
/// `nodes` per coordinate up to m = 2, fewer beyond.
inline DistributionOracle make_oracle(const Law& law, int dimension = 1, int nodes = 200, int scalar_panels = 4000) {
  const int m = law.kind == Law::Kind::product ? law.dimension() : dimension;
  int per_dim = nodes;
  if (m > 2) per_dim = std::max(8, static_cast<int>(std::floor(std::pow(4.0e6, 1.0 / m))));
  std::vector<Rule1D> rules;
  if (m == 1) {
    rules.push_back(law.factor(0).composite_rule(scalar_panels));
  } else {
    for (int j = 0; j < m; ++j) rules.push_back(law.factor(law.kind == Law::Kind::product ? j : 0).rule(per_dim));
  }
  DistributionOracle oracle;
  oracle.quadrature = tensor_product(rules);
  oracle.dimension = m;
  oracle.sampler = [law, dimension](std::uint64_t seed, Eigen::Index count) {
    return sample(SamplerConfig{law, dimension, seed}, count).data();
  };
  return oracle;
}

}  // namespace crf
