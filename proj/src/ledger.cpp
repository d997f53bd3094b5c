#include "aware/ledger.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "aware/errors.hpp"

namespace aware::ledger {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double fixed_budget(double w0, double gamma) { return w0 / (gamma + w0); }

double hopeful_budget(const LedgerState& state, const LedgerConfig& config,
                      double delta) {
  const double w = state.wealth_at_last_rejection;
  return std::min(config.alpha, w / (delta + w));
}

std::int64_t window_rejections(const LedgerState& state,
                               std::optional<std::int64_t> window,
                               std::int64_t& window_size) {
  const auto n = static_cast<std::int64_t>(state.rejection_history.size());
  const std::int64_t begin = window ? std::max<std::int64_t>(0, n - *window) : 0;
  window_size = n - begin;
  return std::count(state.rejection_history.begin() + begin,
                    state.rejection_history.end(), true);
}

double hybrid_budget(const LedgerState& state, const LedgerConfig& config,
                     const Hybrid& h) {
  std::int64_t size = 0;
  const auto rejected = window_rejections(state, h.window, size);
  if (static_cast<double>(rejected) <= static_cast<double>(size) * h.epsilon) {
    return fixed_budget(config.initial_wealth(), h.gamma);
  }
  return hopeful_budget(state, config, h.delta);
}

// Budget the policy would assign if called now, ignoring the exhausted flag.
double raw_budget(const LedgerState& state, const LedgerConfig& config,
                  std::optional<double> support_fraction) {
  return std::visit(
      overloaded{
          [&](const Farsighted& p) {
            const double keep = state.wealth * (1.0 - p.beta);
            return std::min(config.alpha, keep / (1.0 + keep));
          },
          [&](const Fixed& p) {
            return fixed_budget(config.initial_wealth(), p.gamma);
          },
          [&](const Hopeful& p) { return hopeful_budget(state, config, p.delta); },
          [&](const Hybrid& p) { return hybrid_budget(state, config, p); },
          [&](const Support& p) {
            if (!support_fraction) {
              throw MissingInputError("support policy requires a support fraction");
            }
            const double f = *support_fraction;
            if (!(f > 0.0 && f <= 1.0)) {
              throw DomainError("support fraction must be in (0, 1]");
            }
            return fixed_budget(config.initial_wealth(), p.base.gamma) *
                   std::pow(f, p.psi);
          },
      },
      config.policy);
}

bool compute_exhausted(const LedgerState& state, const LedgerConfig& config) {
  return std::visit(
      overloaded{
          [&](const Farsighted&) { return !(state.wealth > 0.0); },
          [&](const Fixed&) {
            return !affordable(state, raw_budget(state, config, std::nullopt));
          },
          [&](const Hopeful&) {
            return !affordable(state, raw_budget(state, config, std::nullopt));
          },
          [&](const Hybrid&) { return state.wealth < kMinimumBudget; },
          [&](const Support&) { return state.wealth < kMinimumBudget; },
      },
      config.policy);
}

double parse_number(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("invalid value for " + std::string(key) + ": " + std::string(text));
  }
  return v;
}

std::string format_number(double v) {
  // shortest round-trippable form, never exponent notation for moderate values
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return std::to_string(v);
  std::string s(buf, ptr);
  if (s.find('e') != std::string::npos && std::fabs(v) >= 1e-6 && std::fabs(v) < 1e15) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(17) << v;
    s = os.str();
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
  }
  return s;
}

}  // namespace

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::rejected:
      return "rejected";
    case Outcome::accepted:
      return "accepted";
    case Outcome::untested:
      return "untested";
  }
  return "untested";
}

bool StreamDecision::operator==(const StreamDecision& other) const {
  if (outcome != other.outcome || wealth_after != other.wealth_after) return false;
  if (std::isnan(budget) || std::isnan(other.budget)) {
    return std::isnan(budget) && std::isnan(other.budget);
  }
  return budget == other.budget;
}

std::string policy_name(const PolicyConfig& policy) {
  return std::visit(overloaded{
                        [](const Farsighted&) { return std::string("farsighted"); },
                        [](const Fixed&) { return std::string("fixed"); },
                        [](const Hopeful&) { return std::string("hopeful"); },
                        [](const Hybrid&) { return std::string("hybrid"); },
                        [](const Support&) { return std::string("support"); },
                    },
                    policy);
}

std::string describe(const PolicyConfig& policy) {
  return std::visit(
      overloaded{
          [](const Farsighted& p) { return "farsighted:beta=" + format_number(p.beta); },
          [](const Fixed& p) { return "fixed:gamma=" + format_number(p.gamma); },
          [](const Hopeful& p) { return "hopeful:delta=" + format_number(p.delta); },
          [](const Hybrid& p) {
            std::string s = "hybrid:epsilon=" + format_number(p.epsilon) +
                            ",gamma=" + format_number(p.gamma) +
                            ",delta=" + format_number(p.delta);
            if (p.window) s += ",window=" + std::to_string(*p.window);
            return s;
          },
          [](const Support& p) {
            return "support:psi=" + format_number(p.psi) +
                   ",gamma=" + format_number(p.base.gamma);
          },
      },
      policy);
}

bool is_policy_name(std::string_view name) {
  return name == "farsighted" || name == "fixed" || name == "hopeful" ||
         name == "hybrid" || name == "support";
}

PolicyConfig parse_policy(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string_view name = spec.substr(0, colon);
  std::map<std::string, double, std::less<>> params;
  if (colon != std::string_view::npos) {
    std::string_view rest = spec.substr(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("expected key=value in policy spec: " + std::string(item));
      }
      const std::string key(item.substr(0, eq));
      params[key] = parse_number(key, item.substr(eq + 1));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }
  auto take = [&](const char* key, double fallback) {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    const double v = it->second;
    params.erase(it);
    return v;
  };
  PolicyConfig policy;
  if (name == "farsighted") {
    policy = Farsighted{take("beta", 0.25)};
  } else if (name == "fixed") {
    policy = Fixed{take("gamma", 10.0)};
  } else if (name == "hopeful") {
    policy = Hopeful{take("delta", 10.0)};
  } else if (name == "hybrid") {
    Hybrid h;
    h.epsilon = take("epsilon", h.epsilon);
    h.gamma = take("gamma", h.gamma);
    h.delta = take("delta", h.delta);
    const double window = take("window", 0.0);
    if (window < 0.0 || window != std::floor(window)) {
      throw ConfigError("hybrid window must be a nonnegative integer");
    }
    if (window > 0.0) h.window = static_cast<std::int64_t>(window);
    policy = h;
  } else if (name == "support") {
    Support s;
    s.psi = take("psi", s.psi);
    s.base.gamma = take("gamma", s.base.gamma);
    policy = s;
  } else {
    throw ConfigError("unknown policy: " + std::string(name));
  }
  if (!params.empty()) {
    throw ConfigError("unknown parameter for " + std::string(name) + ": " +
                      params.begin()->first);
  }
  return policy;
}

bool is_thrifty(const PolicyConfig& policy) {
  return std::holds_alternative<Farsighted>(policy);
}

LedgerConfig LedgerConfig::with_defaults(PolicyConfig policy, double alpha) {
  LedgerConfig c;
  c.alpha = alpha;
  c.eta = 1.0 - alpha;
  c.omega = alpha;
  c.policy = std::move(policy);
  return c;
}

void LedgerConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must be in (0, 1]");
  if (!(omega > 0.0 && omega <= alpha)) throw ConfigError("omega must be in (0, alpha]");
  std::visit(overloaded{
                 [](const Farsighted& p) {
                   if (!(p.beta >= 0.0 && p.beta < 1.0)) {
                     throw ConfigError("beta must be in [0, 1)");
                   }
                 },
                 [](const Fixed& p) {
                   if (!(p.gamma > 0.0) || !std::isfinite(p.gamma)) {
                     throw ConfigError("gamma must be positive");
                   }
                 },
                 [](const Hopeful& p) {
                   if (!(p.delta > 0.0) || !std::isfinite(p.delta)) {
                     throw ConfigError("delta must be positive");
                   }
                 },
                 [](const Hybrid& p) {
                   if (!(p.epsilon >= 0.0 && p.epsilon <= 1.0)) {
                     throw ConfigError("epsilon must be in [0, 1]");
                   }
                   if (!(p.gamma > 0.0) || !(p.delta > 0.0)) {
                     throw ConfigError("hybrid gamma and delta must be positive");
                   }
                   if (p.window && *p.window < 1) {
                     throw ConfigError("hybrid window must be at least 1");
                   }
                 },
                 [](const Support& p) {
                   if (!(p.psi > 0.0) || !std::isfinite(p.psi)) {
                     throw ConfigError("psi must be positive");
                   }
                   if (!(p.base.gamma > 0.0)) throw ConfigError("gamma must be positive");
                 },
             },
             policy);
}

LedgerState initial_state(const LedgerConfig& config) {
  config.validate();
  LedgerState s;
  s.wealth = config.initial_wealth();
  s.wealth_at_last_rejection = s.wealth;
  s.exhausted = compute_exhausted(s, config);
  return s;
}

double acceptance_cost(double budget) { return budget / (1.0 - budget); }

bool affordable(const LedgerState& state, double budget) {
  return budget > 0.0 && budget < 1.0 &&
         acceptance_cost(budget) <= state.wealth + kWealthFloor;
}

double next_budget(const LedgerState& state, const LedgerConfig& config,
                   std::optional<double> support_fraction) {
  if (state.exhausted) throw ExhaustionError("alpha-wealth exhausted");
  return raw_budget(state, config, support_fraction);
}

std::pair<Decision, LedgerState> apply_outcome(const LedgerState& state,
                                               const LedgerConfig& config,
                                               double budget, double p_value) {
  if (std::isnan(p_value) || p_value < 0.0 || p_value > 1.0) {
    throw DomainError("p-value must be in [0, 1]");
  }
  if (!(budget > 0.0 && budget < 1.0)) {
    throw AccountingError("budget must be in (0, 1)");
  }
  if (!affordable(state, budget)) {
    throw AccountingError("budget would drive wealth negative");
  }
  Decision d;
  d.budget = budget;
  d.wealth_before = state.wealth;
  d.rejected = p_value <= budget;

  LedgerState next = state;
  next.j += 1;
  if (d.rejected) {
    next.wealth = state.wealth + config.omega;
    next.k_star = next.j;
    next.wealth_at_last_rejection = next.wealth;
  } else {
    next.wealth = state.wealth - acceptance_cost(budget);
    if (!is_thrifty(config.policy) && next.wealth < kWealthFloor) next.wealth = 0.0;
    next.wealth = std::max(next.wealth, 0.0);
  }
  next.rejection_history.push_back(d.rejected);
  next.exhausted = compute_exhausted(next, config);
  d.wealth_after = next.wealth;
  return {d, std::move(next)};
}

StreamDecision step(LedgerState& state, const LedgerConfig& config,
                    double p_value, std::optional<double> support_fraction) {
  StreamDecision out;
  out.budget = std::numeric_limits<double>::quiet_NaN();
  out.wealth_after = state.wealth;
  if (state.exhausted) return out;
  const double budget = next_budget(state, config, support_fraction);
  if (!affordable(state, budget)) return out;
  auto [decision, next] = apply_outcome(state, config, budget, p_value);
  state = std::move(next);
  out.outcome = decision.rejected ? Outcome::rejected : Outcome::accepted;
  out.budget = decision.budget;
  out.wealth_after = decision.wealth_after;
  return out;
}

std::vector<StreamDecision> run_stream(const LedgerConfig& config,
                                       std::span<const StreamItem> inputs) {
  LedgerState state = initial_state(config);
  std::vector<StreamDecision> out;
  out.reserve(inputs.size());
  for (const auto& item : inputs) {
    if (std::isnan(item.p_value) || item.p_value < 0.0 || item.p_value > 1.0) {
      throw DomainError("p-value must be in [0, 1]");
    }
    out.push_back(step(state, config, item.p_value, item.support_fraction));
  }
  return out;
}

}  // namespace aware::ledger
