#include "aware/json_io.hpp"

#include <cmath>

#include "aware/errors.hpp"

using nlohmann::json;

namespace aware {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Wraps nlohmann lookups so malformed requests surface as SchemaError.
template <class T>
T get_field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw SchemaError(std::string("missing field: ") + key);
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("invalid field ") + key + ": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("invalid field ") + key + ": " + e.what());
  }
}

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string value_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  throw SchemaError("filter values must be strings or numbers");
}

data::Filters filters_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  if (!j.at(key).is_array()) throw SchemaError(std::string(key) + " must be an array");
  data::Filters out;
  for (const auto& f : j.at(key)) out.push_back(f.get<data::FilterPredicate>());
  return out;
}

std::string target_from(const json& j) {
  if (j.contains("target")) return get_field<std::string>(j, "target");
  if (j.contains("attribute")) return get_field<std::string>(j, "attribute");
  throw SchemaError("missing field: target");
}

}  // namespace

namespace stats {

void to_json(json& j, const Histogram& h) {
  json bins = json::array();
  for (const auto& b : h.bins) bins.push_back({{"label", b.label}, {"count", b.count}});
  j = json{{"bins", bins}, {"total", h.total()}};
}

void from_json(const json& j, Histogram& h) {
  h.bins.clear();
  if (j.is_object() && j.contains("bins")) {
    for (const auto& b : j.at("bins")) {
      h.bins.push_back({get_field<std::string>(b, "label"), get_field<std::int64_t>(b, "count")});
    }
  } else if (j.is_object()) {
    // {"m": 50, "f": 50}
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!it.value().is_number_integer()) throw SchemaError("histogram counts must be integers");
      h.bins.push_back({it.key(), it.value().get<std::int64_t>()});
    }
  } else {
    throw SchemaError("histogram must be an object");
  }
  for (const auto& b : h.bins) {
    if (b.count < 0) throw SchemaError("histogram counts must be nonnegative");
  }
}

void to_json(json& j, const TestResult& r) {
  j = json{{"statistic", r.statistic},
           {"df", r.df},
           {"p_value", r.p_value},
           {"support", r.support},
           {"kind", to_string(r.kind)},
           {"low_expected_counts", r.low_expected_counts}};
}

}  // namespace stats

namespace data {

void to_json(json& j, const FilterPredicate& f) {
  j = json{{"column", f.column}, {"op", to_string(f.op)}, {"negated", f.negated}};
  switch (f.op) {
    case FilterOp::equals:
      j["value"] = f.values.empty() ? std::string() : f.values.front();
      break;
    case FilterOp::in_set:
      j["values"] = f.values;
      break;
    case FilterOp::range:
      j["lo"] = optional_number(f.lo);
      j["hi"] = optional_number(f.hi);
      break;
  }
}

void from_json(const json& j, FilterPredicate& f) {
  f = FilterPredicate{};
  f.column = get_field<std::string>(j, "column");
  f.op = filter_op_from_string(get_or<std::string>(j, "op", "equals"));
  f.negated = get_or<bool>(j, "negated", false);
  switch (f.op) {
    case FilterOp::equals:
      if (!j.contains("value")) throw SchemaError("equals filter needs a value");
      f.values = {value_to_string(j.at("value"))};
      break;
    case FilterOp::in_set:
      if (!j.contains("values") || !j.at("values").is_array()) {
        throw SchemaError("in_set filter needs a values array");
      }
      for (const auto& v : j.at("values")) f.values.push_back(value_to_string(v));
      break;
    case FilterOp::range:
      if (j.contains("lo") && !j.at("lo").is_null()) f.lo = get_field<double>(j, "lo");
      if (j.contains("hi") && !j.at("hi").is_null()) f.hi = get_field<double>(j, "hi");
      if (f.lo && f.hi && *f.lo > *f.hi) throw SchemaError("range filter with lo > hi");
      break;
  }
}

}  // namespace data

namespace ledger {

json policy_to_json(const PolicyConfig& policy) {
  return std::visit(
      overloaded{
          [](const Farsighted& p) { return json{{"name", "farsighted"}, {"beta", p.beta}}; },
          [](const Fixed& p) { return json{{"name", "fixed"}, {"gamma", p.gamma}}; },
          [](const Hopeful& p) { return json{{"name", "hopeful"}, {"delta", p.delta}}; },
          [](const Hybrid& p) {
            json j{{"name", "hybrid"}, {"epsilon", p.epsilon}, {"gamma", p.gamma}, {"delta", p.delta}};
            j["window"] = p.window ? json(*p.window) : json(nullptr);
            return j;
          },
          [](const Support& p) {
            return json{{"name", "support"}, {"psi", p.psi}, {"gamma", p.base.gamma}};
          },
      },
      policy);
}

PolicyConfig policy_from_json(const json& j) {
  if (j.is_string()) return parse_policy(j.get<std::string>());
  if (!j.is_object()) throw ConfigError("policy must be a string or an object");
  const auto name = get_field<std::string>(j, "name");
  std::string spec = name;
  char sep = ':';
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "name" || it.value().is_null()) continue;
    if (!it.value().is_number()) throw ConfigError("policy parameter " + it.key() + " must be numeric");
    spec += sep;
    spec += it.key() + "=" + it.value().dump();
    sep = ',';
  }
  return parse_policy(spec);
}

json config_to_json(const LedgerConfig& config) {
  return json{{"alpha", config.alpha},
              {"eta", config.eta},
              {"omega", config.omega},
              {"policy", policy_to_json(config.policy)}};
}

LedgerConfig config_from_json(const json& j) {
  const double alpha = get_or<double>(j, "alpha", 0.05);
  PolicyConfig policy = Fixed{};
  if (j.contains("policy") && !j.at("policy").is_null()) policy = policy_from_json(j.at("policy"));
  LedgerConfig c = LedgerConfig::with_defaults(policy, alpha);
  c.eta = get_or<double>(j, "eta", c.eta);
  c.omega = get_or<double>(j, "omega", c.omega);
  c.validate();
  return c;
}

}  // namespace ledger

namespace session {

void to_json(json& j, const VisualizationSpec& v) {
  j = json{{"target", v.target}, {"filters", v.filters}, {"bins", v.bins}};
  j["linked_to"] = v.linked_to ? json(*v.linked_to) : json(nullptr);
}

void from_json(const json& j, VisualizationSpec& v) {
  if (!j.is_object()) throw SchemaError("visualization must be an object");
  v = VisualizationSpec{};
  v.target = target_from(j);
  v.filters = filters_from(j, "filters");
  if (j.contains("linked_to") && !j.at("linked_to").is_null()) {
    v.linked_to = get_field<std::int64_t>(j, "linked_to");
  }
  v.bins = get_or<int>(j, "bins", data::kDefaultBins);
}

json test_spec_to_json(const TestSpec& spec) {
  return std::visit(
      overloaded{
          [](const GofSpec& s) {
            json j{{"kind", "chi2_gof"}, {"target", s.target}, {"filters", s.filters}, {"bins", s.bins}};
            j["reference"] = s.reference ? json(*s.reference) : json(nullptr);
            return j;
          },
          [](const HomogeneitySpec& s) {
            return json{{"kind", "chi2_homogeneity"},
                        {"target", s.target},
                        {"filters_a", s.filters_a},
                        {"filters_b", s.filters_b},
                        {"bins", s.bins}};
          },
          [](const WelchSpec& s) {
            return json{{"kind", "welch_t"},
                        {"target", s.target},
                        {"filters_a", s.filters_a},
                        {"filters_b", s.filters_b},
                        {"alternative", s.alternative == stats::Alternative::greater ? "greater"
                                                                                     : "two_sided"}};
          },
      },
      spec);
}

TestSpec test_spec_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("test spec must be an object");
  const auto kind = get_field<std::string>(j, "kind");
  if (kind == "chi2_gof") {
    GofSpec s;
    s.target = target_from(j);
    s.filters = filters_from(j, "filters");
    s.bins = get_or<int>(j, "bins", data::kDefaultBins);
    if (j.contains("reference") && !j.at("reference").is_null()) {
      s.reference = j.at("reference").get<stats::Histogram>();
    }
    return s;
  }
  if (kind == "chi2_homogeneity") {
    HomogeneitySpec s;
    s.target = target_from(j);
    s.filters_a = filters_from(j, "filters_a");
    s.filters_b = filters_from(j, "filters_b");
    s.bins = get_or<int>(j, "bins", data::kDefaultBins);
    return s;
  }
  if (kind == "welch_t" || kind == "welch_t_two_sided" || kind == "welch_t_one_sided") {
    WelchSpec s;
    s.target = target_from(j);
    s.filters_a = filters_from(j, "filters_a");
    s.filters_b = filters_from(j, "filters_b");
    std::string alt = get_or<std::string>(
        j, "alternative", kind == "welch_t_one_sided" ? "greater" : "two_sided");
    if (alt == "greater" || alt == "one_sided_greater") {
      s.alternative = stats::Alternative::greater;
    } else if (alt == "two_sided") {
      s.alternative = stats::Alternative::two_sided;
    } else {
      throw SchemaError("unknown alternative: " + alt);
    }
    return s;
  }
  throw SchemaError("unknown test kind: " + kind);
}

json record_to_json(const HypothesisRecord& r) {
  json j{{"id", r.id},
         {"null", r.null_text},
         {"alternative", r.alternative_text},
         {"origin", r.origin == Origin::visualization ? "visualization" : "explicit"},
         {"source_viz", r.source_viz},
         {"support_fraction", r.support_fraction},
         {"decision", to_string(r.decision)},
         {"starred", r.starred},
         {"deleted", r.deleted}};
  j["test"] = r.spec ? test_spec_to_json(*r.spec) : json(nullptr);
  j["superseded_by"] = r.superseded_by ? json(*r.superseded_by) : json(nullptr);
  j["budget"] = optional_number(r.budget);
  if (r.result) {
    j["kind"] = stats::to_string(r.result->kind);
    j["p_value"] = r.result->p_value;
    j["statistic"] = r.result->statistic;
    j["df"] = r.result->df;
    j["support"] = r.result->support;
    j["low_expected_counts"] = r.result->low_expected_counts;
  } else {
    j["kind"] = nullptr;
    j["p_value"] = nullptr;
    j["statistic"] = nullptr;
    j["df"] = nullptr;
    j["support"] = 0;
    j["low_expected_counts"] = false;
  }
  if (!r.warning.empty()) j["warning"] = r.warning;
  return j;
}

}  // namespace session
}  // namespace aware
