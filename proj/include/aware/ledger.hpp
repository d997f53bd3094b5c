#pragma once

// Alpha-investing wealth ledger.
//
// Wealth starts at W(0) = eta * alpha. Each test j receives a budget alpha_j
// chosen by an investing policy; a rejection (p <= alpha_j) earns omega, an
// acceptance costs alpha_j / (1 - alpha_j). The policies differ only in how
// alpha_j is chosen:
//
//   farsighted(beta)  alpha_j = min(alpha, W(1-beta) / (1 + W(1-beta)))
//   fixed(gamma)      alpha_j = W(0) / (gamma + W(0))
//   hopeful(delta)    alpha_j = min(alpha, W(k*) / (delta + W(k*))), W(k*) the
//                     wealth right after the last rejection
//   hybrid(epsilon)   fixed while the rejection ratio over the window is at
//                     most epsilon, hopeful otherwise
//   support(psi)      fixed budget scaled by support_fraction^psi
//
// A ledger state is a value; transitions return new states and never mutate
// the input, so snapshots can be shared freely.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace aware::ledger {

struct Farsighted {
  double beta = 0.25;
};

struct Fixed {
  double gamma = 10.0;
};

struct Hopeful {
  double delta = 10.0;
};

struct Hybrid {
  double epsilon = 0.5;
  double gamma = 10.0;
  double delta = 10.0;
  std::optional<std::int64_t> window;  // unbounded when empty
};

struct Support {
  double psi = 0.5;
  Fixed base;
};

using PolicyConfig = std::variant<Farsighted, Fixed, Hopeful, Hybrid, Support>;

/// Short policy name: "farsighted", "fixed", "hopeful", "hybrid", "support".
std::string policy_name(const PolicyConfig& policy);
/// Canonical "name:key=value,..." form, parseable by parse_policy.
std::string describe(const PolicyConfig& policy);
/// Parses "fixed", "fixed:gamma=20", "hybrid:epsilon=0.3,window=16", ...
/// Missing parameters take the defaults above. Throws ConfigError.
PolicyConfig parse_policy(std::string_view spec);
bool is_policy_name(std::string_view name);

/// Thrifty policies never commit all of their wealth.
bool is_thrifty(const PolicyConfig& policy);

struct LedgerConfig {
  double alpha = 0.05;
  double eta = 0.95;
  double omega = 0.05;
  PolicyConfig policy = Fixed{};

  /// alpha = 0.05, eta = 1 - alpha, omega = alpha.
  static LedgerConfig with_defaults(PolicyConfig policy, double alpha = 0.05);

  double initial_wealth() const { return eta * alpha; }
  /// Throws ConfigError when a parameter is outside its range.
  void validate() const;
};

struct LedgerState {
  std::int64_t j = 0;
  double wealth = 0.0;
  std::int64_t k_star = 0;
  double wealth_at_last_rejection = 0.0;
  std::vector<bool> rejection_history;
  bool exhausted = false;

  bool operator==(const LedgerState&) const = default;
};

struct Decision {
  bool rejected = false;
  double budget = 0.0;
  double wealth_before = 0.0;
  double wealth_after = 0.0;

  bool operator==(const Decision&) const = default;
};

enum class Outcome { rejected, accepted, untested };

std::string_view to_string(Outcome outcome);

struct StreamItem {
  double p_value = 1.0;
  std::optional<double> support_fraction;
};

/// One entry of a processed stream. `budget` is NaN for untested entries.
struct StreamDecision {
  Outcome outcome = Outcome::untested;
  double budget = 0.0;
  double wealth_after = 0.0;

  bool operator==(const StreamDecision& other) const;
};

// Wealth below this is treated as zero by the non-thrifty policies.
inline constexpr double kWealthFloor = 1e-12;
// Smallest budget worth funding for the policies that skip unaffordable tests.
inline constexpr double kMinimumBudget = 1e-9;

LedgerState initial_state(const LedgerConfig& config);

/// Budget the policy assigns to the next test. Throws ExhaustionError on an
/// exhausted state and MissingInputError when the support policy gets no
/// support fraction.
double next_budget(const LedgerState& state, const LedgerConfig& config,
                   std::optional<double> support_fraction = std::nullopt);

/// Deduction charged when a test with this budget is accepted.
double acceptance_cost(double budget);

/// True when accepting a test at `budget` keeps wealth nonnegative.
bool affordable(const LedgerState& state, double budget);

/// Applies the test outcome (rejected iff p <= budget) and returns the
/// decision together with the successor state.
std::pair<Decision, LedgerState> apply_outcome(const LedgerState& state,
                                               const LedgerConfig& config,
                                               double budget, double p_value);

/// One full step: budget, affordability check, outcome. Exhausted states and
/// unaffordable budgets yield `untested` and leave the state unchanged.
StreamDecision step(LedgerState& state, const LedgerConfig& config,
                    double p_value,
                    std::optional<double> support_fraction = std::nullopt);

std::vector<StreamDecision> run_stream(const LedgerConfig& config,
                                       std::span<const StreamItem> inputs);

}  // namespace aware::ledger
