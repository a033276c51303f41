#pragma once

#include "crf/quadrature.hpp"
#include "crf/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

namespace crf {

enum class KernelFamily { uniform, gaussian, epanechnikov };

inline std::string to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::uniform: return "uniform";
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::epanechnikov: return "epanechnikov";
  }
  return "unknown";
}

inline KernelFamily parse_kernel_family(const std::string& name) {
  if (name == "uniform") return KernelFamily::uniform;
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "epanechnikov") return KernelFamily::epanechnikov;
  throw ConfigError("unknown kernel family '" + name + "'");
}

/// Symmetric product kernel on R^m built from a one-dimensional density.
/// Moments are per coordinate: m_q(K) = int |z|^q K(z) dz.
struct KernelSpec {
  KernelFamily family = KernelFamily::uniform;
  int dimension = 1;
  double moment_order = 2.0;
  double first_moment = 0.5;  // m_1(K)
  double pth_moment = 1.0 / 3.0;  // m_p(K)

  static double absolute_moment(KernelFamily family, double q) {
    switch (family) {
      case KernelFamily::uniform: return 1.0 / (q + 1.0);
      case KernelFamily::gaussian:
        return std::pow(2.0, q / 2.0) * std::tgamma((q + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
      case KernelFamily::epanechnikov: return 3.0 / ((q + 1.0) * (q + 3.0));
    }
    return 0.0;
  }

  static KernelSpec make(KernelFamily family, int dimension = 1, double moment_order = 2.0) {
    if (dimension < 1) throw ConfigError("kernel dimension must be positive");
    if (!(moment_order >= 1.0)) throw ConfigError("kernel moment order must be >= 1");
    return {family, dimension, moment_order, absolute_moment(family, 1.0),
            absolute_moment(family, moment_order)};
  }

  /// One-dimensional density.
  double density(double z) const {
    switch (family) {
      case KernelFamily::uniform: return std::abs(z) <= 1.0 ? 0.5 : 0.0;
      case KernelFamily::gaussian: return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
      case KernelFamily::epanechnikov: return std::abs(z) <= 1.0 ? 0.75 * (1.0 - z * z) : 0.0;
    }
    return 0.0;
  }

  bool bounded_support() const { return family != KernelFamily::gaussian; }

  /// Node/weight rule for one coordinate of the standardized kernel.
  Rule1D rule(int nodes) const {
    if (family == KernelFamily::gaussian) return normal_rule(nodes, 0.0, 1.0);
    return weighted_rule(gauss_legendre(nodes));
  }

  /// Rule on [lo, hi] within the support, weights multiplied by the density.
  Rule1D rule_on(int nodes, double lo, double hi) const { return weighted_rule(gauss_legendre(nodes, lo, hi)); }

 private:
  Rule1D weighted_rule(Rule1D r) const {
    for (std::size_t i = 0; i < r.size(); ++i) r.weights[i] *= density(r.nodes[i]);
    return r;
  }
};

enum class BandwidthRule { silverman, power, none };

/// h_n schedule: silverman 1.06*sigma*n^(-1/5), power a*n^(-gamma), or none
/// (h_n = 0, the empirical point-mass limit).
struct BandwidthSchedule {
  BandwidthRule rule = BandwidthRule::silverman;
  double scale = 1.0;
  double exponent = 0.2;

  static BandwidthSchedule silverman() { return {BandwidthRule::silverman, 1.06, 0.2}; }
  static BandwidthSchedule power(double a, double gamma) {
    if (!(a > 0.0) || !(gamma > 0.0)) throw ConfigError("power bandwidth needs a > 0 and gamma > 0");
    return {BandwidthRule::power, a, gamma};
  }
  static BandwidthSchedule none() { return {BandwidthRule::none, 0.0, 0.0}; }

  std::string describe() const {
    std::ostringstream os;
    switch (rule) {
      case BandwidthRule::silverman: os << "silverman"; break;
      case BandwidthRule::power: os << "power:" << scale << "," << exponent; break;
      case BandwidthRule::none: os << "none"; break;
    }
    return os.str();
  }
};

/// Parses "silverman", "none" or "power:a,gamma".
inline BandwidthSchedule parse_bandwidth(const std::string& text) {
  if (text == "silverman") return BandwidthSchedule::silverman();
  if (text == "none") return BandwidthSchedule::none();
  if (text.rfind("power:", 0) == 0) {
    const std::string args = text.substr(6);
    const auto comma = args.find(',');
    if (comma == std::string::npos) throw ConfigError("power bandwidth expects power:a,gamma");
    try {
      return BandwidthSchedule::power(std::stod(args.substr(0, comma)), std::stod(args.substr(comma + 1)));
    } catch (const std::logic_error&) {
      throw ConfigError("cannot parse bandwidth '" + text + "'");
    }
  }
  throw ConfigError("unknown bandwidth rule '" + text + "'");
}

inline double bandwidth(const BandwidthSchedule& schedule, long long n, double sigma_hat) {
  if (n < 1) throw ConfigError("bandwidth: n must be >= 1");
  const double dn = static_cast<double>(n);
  switch (schedule.rule) {
    case BandwidthRule::silverman: {
      if (!(sigma_hat >= 0.0)) throw ConfigError("bandwidth: sigma_hat must be non-negative");
      const double h = schedule.scale * sigma_hat * std::pow(dn, -0.2);
      if (h == 0.0) throw DegenerateSmoothing("silverman bandwidth is zero (zero sample spread); use empirical estimation");
      return h;
    }
    case BandwidthRule::power: return schedule.scale * std::pow(dn, -schedule.exponent);
    case BandwidthRule::none: return 0.0;
  }
  return 0.0;
}

struct IdentityDiagnostic {
  bool pass = false;
  /// Exponent e in sqrt(n) * max(h_n m_1, h_n^p m_p) ~ n^e; -inf when h_n = 0.
  double moment_exponent = 0.0;
  /// Whether n * h_n^2 -> 0.
  bool bandwidth_condition = false;
  std::string explanation;
};

/// Checks whether the kernel measures with the given schedule vanish fast
/// enough: sqrt(n) * max(h_n m_1(K), h_n^p m_p(K)) -> 0.
inline IdentityDiagnostic check_strong_identity(const BandwidthSchedule& schedule, const KernelSpec& kernel,
                                                double p) {
  IdentityDiagnostic out;
  std::ostringstream os;
  if (!std::isfinite(kernel.first_moment) || !std::isfinite(kernel.pth_moment)) {
    out.explanation = "kernel moments are not finite";
    return out;
  }
  if (schedule.rule == BandwidthRule::none) {
    out.pass = true;
    out.bandwidth_condition = true;
    out.moment_exponent = -std::numeric_limits<double>::infinity();
    out.explanation = "h_n = 0: smoothing measure is the point mass at 0";
    return out;
  }
  // h_n ~ n^-gamma with h_n -> 0, so h_n^p <= h_n eventually for p >= 1 and
  // the first-moment term dominates.
  const double gamma = schedule.rule == BandwidthRule::silverman ? 0.2 : schedule.exponent;
  out.moment_exponent = 0.5 - gamma;
  out.pass = out.moment_exponent < 0.0;
  out.bandwidth_condition = 1.0 - 2.0 * gamma < 0.0;
  os << schedule.describe() << " with " << to_string(kernel.family) << " kernel, p = " << p
     << ": sqrt(n) * max(h m1, h^p mp) ~ n^" << out.moment_exponent
     << (out.pass ? " -> 0 (pass)" : " does not vanish (fail)") << "; n h^2 ~ n^" << 1.0 - 2.0 * gamma
     << (out.bandwidth_condition ? " -> 0" : " does not vanish");
  out.explanation = os.str();
  return out;
}

}  // namespace crf
