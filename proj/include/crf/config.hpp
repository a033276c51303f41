#pragma once

// Declarative measure documents (JSON) consumed by the CLI.
//
//   {"kind": "mean"}
//   {"kind": "mean_semideviation", "kappa": 0.5, "p": 2}
//   {"kind": "higher_order", "c": 20, "p": 2}
//   {"kind": "portfolio", "kappa": 0.5, "p": 2, "allocation": [0.5, 0.5]}
//   {"kind": "systemic", "weights": [0.5, 0.5],
//    "outer": {"kind": "mean_semideviation", "kappa": 0.5, "p": 2},
//    "components": [{"measure": {...}, "law": "normal_var:10,3"}, ...]}

#include "crf/measures.hpp"
#include "crf/sampling.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace crf {

enum class MeasureKind { mean, mean_semideviation, higher_order, portfolio, systemic };

inline std::string to_string(MeasureKind k) {
  switch (k) {
    case MeasureKind::mean: return "mean";
    case MeasureKind::mean_semideviation: return "mean_semideviation";
    case MeasureKind::higher_order: return "higher_order";
    case MeasureKind::portfolio: return "portfolio";
    case MeasureKind::systemic: return "systemic";
  }
  return "unknown";
}

struct MeasureConfig {
  MeasureKind kind = MeasureKind::mean;
  MeasureParams params;
  Vector allocation;  // portfolio
  std::string label;

  // systemic only
  std::vector<MeasureConfig> components;
  std::vector<Law> component_laws;
  OuterAggregation outer;

  bool optimizes() const { return kind == MeasureKind::higher_order; }

  /// Spec for a non-optimizing, non-systemic measure on R^m.
  CompositeSpec spec(int m = 1) const {
    switch (kind) {
      case MeasureKind::mean: return make_mean(m);
      case MeasureKind::mean_semideviation:
        if (m != 1) throw ConfigError("mean_semideviation is defined on scalar samples");
        return make_mean_semideviation(params);
      case MeasureKind::portfolio:
        if (allocation.size() != m) throw ConfigError("portfolio allocation length does not match the law dimension");
        return make_portfolio_semideviation(params, m)(allocation);
      case MeasureKind::higher_order:
      case MeasureKind::systemic: break;
    }
    throw ConfigError(to_string(kind) + " measure has no single composite spec");
  }

  ScalarFamily family() const {
    if (kind != MeasureKind::higher_order) throw ConfigError(to_string(kind) + " is not an optimized measure");
    return make_higher_order_family(params);
  }

  SystemicSpec systemic() const {
    if (kind != MeasureKind::systemic) throw ConfigError("not a systemic measure");
    std::vector<CompositeSpec> specs;
    for (std::size_t i = 0; i < components.size(); ++i) {
      const auto& c = components[i];
      specs.push_back(c.optimizes() ? c.family()(component_laws[i].kind == Law::Kind::product ? 0.0 : component_laws[i].mean())
                                    : c.spec(component_laws[i].dimension()));
    }
    Vector weights = params.weights;
    return make_systemic(std::move(specs), std::move(weights), outer);
  }
};

namespace detail {

inline double number_or(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(std::string("measure field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

inline Vector vector_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) throw ConfigError(std::string("measure field '") + key + "' must be an array");
  const auto& arr = j.at(key);
  Vector out(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ConfigError(std::string("measure field '") + key + "' must hold numbers");
    out(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return out;
}

}  // namespace detail

inline MeasureConfig measure_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw ConfigError("measure document needs a string 'kind'");
  }
  const std::string kind = j.at("kind").get<std::string>();
  MeasureConfig cfg;
  cfg.label = j.value("label", kind);
  cfg.params.kappa = detail::number_or(j, "kappa", 0.5);
  cfg.params.p = detail::number_or(j, "p", 2.0);
  cfg.params.c = detail::number_or(j, "c", 2.0);
  if (kind == "mean") {
    cfg.kind = MeasureKind::mean;
  } else if (kind == "mean_semideviation") {
    cfg.kind = MeasureKind::mean_semideviation;
    make_mean_semideviation(cfg.params);
  } else if (kind == "higher_order") {
    cfg.kind = MeasureKind::higher_order;
    make_higher_order_family(cfg.params);
  } else if (kind == "portfolio") {
    cfg.kind = MeasureKind::portfolio;
    cfg.allocation = detail::vector_field(j, "allocation");
    make_portfolio_semideviation(cfg.params, static_cast<int>(cfg.allocation.size()));
  } else if (kind == "systemic") {
    cfg.kind = MeasureKind::systemic;
    cfg.params.weights = detail::vector_field(j, "weights");
    if (!j.contains("components") || !j.at("components").is_array()) throw ConfigError("systemic measure needs 'components'");
    for (const auto& comp : j.at("components")) {
      if (!comp.contains("measure") || !comp.contains("law") || !comp.at("law").is_string()) {
        throw ConfigError("systemic component needs 'measure' and a string 'law'");
      }
      MeasureConfig inner = measure_from_json(comp.at("measure"));
      if (inner.kind == MeasureKind::systemic) throw ConfigError("systemic components cannot be systemic");
      cfg.components.push_back(std::move(inner));
      cfg.component_laws.push_back(parse_law(comp.at("law").get<std::string>()));
    }
    const nlohmann::json outer = j.value("outer", nlohmann::json{{"kind", "linear"}});
    const std::string outer_kind = outer.value("kind", std::string("linear"));
    if (outer_kind == "linear") {
      cfg.outer = {OuterKind::linear, 0.0, 1.0};
    } else if (outer_kind == "mean_semideviation") {
      cfg.outer = {OuterKind::mean_semideviation, detail::number_or(outer, "kappa", 0.5), detail::number_or(outer, "p", 2.0)};
    } else {
      throw ConfigError("unknown outer aggregation '" + outer_kind + "'");
    }
    cfg.systemic();
  } else {
    throw ConfigError("unknown measure kind '" + kind + "'");
  }
  return cfg;
}

inline MeasureConfig load_measure(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open measure file '" + path + "'");
  try {
    return measure_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed measure file '" + path + "': " + e.what());
  }
}

inline nlohmann::json measure_to_json(const MeasureConfig& cfg) {
  nlohmann::json j;
  j["kind"] = to_string(cfg.kind);
  j["label"] = cfg.label;
  switch (cfg.kind) {
    case MeasureKind::mean: break;
    case MeasureKind::mean_semideviation:
      j["kappa"] = cfg.params.kappa;
      j["p"] = cfg.params.p;
      break;
    case MeasureKind::higher_order:
      j["c"] = cfg.params.c;
      j["p"] = cfg.params.p;
      break;
    case MeasureKind::portfolio:
      j["kappa"] = cfg.params.kappa;
      j["p"] = cfg.params.p;
      j["allocation"] = std::vector<double>(cfg.allocation.data(), cfg.allocation.data() + cfg.allocation.size());
      break;
    case MeasureKind::systemic: {
      j["weights"] = std::vector<double>(cfg.params.weights.data(), cfg.params.weights.data() + cfg.params.weights.size());
      j["outer"] = cfg.outer.kind == OuterKind::linear
                       ? nlohmann::json{{"kind", "linear"}}
                       : nlohmann::json{{"kind", "mean_semideviation"}, {"kappa", cfg.outer.kappa}, {"p", cfg.outer.p}};
      nlohmann::json comps = nlohmann::json::array();
      for (std::size_t i = 0; i < cfg.components.size(); ++i) {
        comps.push_back({{"measure", measure_to_json(cfg.components[i])}, {"law", cfg.component_laws[i].describe()}});
      }
      j["components"] = comps;
      break;
    }
  }
  return j;
}

}  // namespace crf
