#pragma once

// Random session traffic for the replay and monotonicity properties.

#include <random>

#include "aware/errors.hpp"
#include "aware/ledger.hpp"
#include "aware/session.hpp"

namespace fuzz {

using aware::data::FilterOp;
using aware::data::FilterPredicate;
using aware::data::Filters;

inline FilterPredicate predicate(std::mt19937_64& rng) {
  FilterPredicate f;
  switch (std::uniform_int_distribution<int>(0, 5)(rng)) {
    case 0:
      f.column = "gender";
      f.values = {std::bernoulli_distribution(0.5)(rng) ? "m" : "f"};
      break;
    case 1:
      f.column = "education";
      f.op = FilterOp::in_set;
      f.values = {"hs", "college"};
      break;
    case 2:
      f.column = "region";
      f.values = {"north"};
      break;
    case 3:
      f.column = "age";
      f.op = FilterOp::range;
      f.lo = 30.0;
      f.hi = 50.0;
      break;
    case 4:
      f.column = "salary";
      f.op = FilterOp::range;
      f.lo = 60000.0;
      break;
    default:
      f.column = "age";
      f.op = FilterOp::range;
      f.hi = 25.0;
      break;
  }
  f.negated = std::bernoulli_distribution(0.3)(rng);
  return f;
}

inline Filters filters(std::mt19937_64& rng, int min_size, int max_size) {
  Filters out;
  const int n = std::uniform_int_distribution<int>(min_size, max_size)(rng);
  for (int i = 0; i < n; ++i) out.push_back(predicate(rng));
  return out;
}

inline std::string target(std::mt19937_64& rng) {
  static const char* names[] = {"gender", "education", "region", "age", "salary"};
  return names[std::uniform_int_distribution<int>(0, 4)(rng)];
}

inline aware::session::TestSpec spec(std::mt19937_64& rng) {
  using namespace aware::session;
  const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
  if (kind == 0) return GofSpec{target(rng), filters(rng, 1, 2), 10, std::nullopt};
  if (kind == 1) {
    auto a = filters(rng, 1, 2);
    auto b = a;
    b[0].negated = !b[0].negated;
    return HomogeneitySpec{target(rng), a, b, 10};
  }
  auto a = filters(rng, 1, 1);
  auto b = a;
  b[0].negated = !b[0].negated;
  const auto alt = std::bernoulli_distribution(0.5)(rng) ? aware::stats::Alternative::greater
                                                         : aware::stats::Alternative::two_sided;
  return WelchSpec{std::bernoulli_distribution(0.5)(rng) ? "age" : "salary", a, b, alt};
}

inline aware::session::VisualizationSpec visualization(aware::session::Session& s,
                                                       std::mt19937_64& rng, bool allow_links) {
  aware::session::VisualizationSpec v;
  const auto& vizzes = s.visualizations();
  if (allow_links && !vizzes.empty() && std::bernoulli_distribution(0.4)(rng)) {
    const auto& other =
        vizzes[std::uniform_int_distribution<std::size_t>(0, vizzes.size() - 1)(rng)];
    v.target = other.spec.target;
    v.filters = other.spec.filters;
    if (!v.filters.empty() && std::bernoulli_distribution(0.8)(rng)) {
      auto& f = v.filters[std::uniform_int_distribution<std::size_t>(0, v.filters.size() - 1)(rng)];
      f.negated = !f.negated;
    }
    v.linked_to = other.id;
    return v;
  }
  v.target = target(rng);
  v.filters = filters(rng, 0, 2);
  return v;
}

/// Applies one random mutation. With `append_only` only new visualizations
/// without links and new explicit hypotheses are produced.
inline void random_event(aware::session::Session& s, std::mt19937_64& rng, bool append_only) {
  using namespace aware::session;
  const int roll = std::uniform_int_distribution<int>(0, 99)(rng);
  std::vector<std::int64_t> live, decided;
  for (const auto& r : s.records()) {
    if (!r.deleted && !r.superseded_by) live.push_back(r.id);
    if (r.decided()) decided.push_back(r.id);
  }
  auto pick = [&](const std::vector<std::int64_t>& ids) {
    return ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng)];
  };
  if (append_only || roll < 55 || live.empty()) {
    if (roll % 2 == 0) {
      s.derive_hypothesis(visualization(s, rng, !append_only));
    } else {
      s.add_hypothesis(spec(rng));
    }
  } else if (roll < 75) {
    s.override_hypothesis(pick(live), spec(rng));
  } else if (roll < 90) {
    s.delete_hypothesis(pick(live));
  } else if (!decided.empty()) {
    s.star_hypothesis(pick(decided), std::bernoulli_distribution(0.7)(rng));
  }
}

/// Recomputes every decision with a fresh ledger over the active records.
/// Returns an empty string when the session agrees, otherwise a description.
inline std::string check_against_fresh_ledger(const aware::session::Session& s) {
  using namespace aware;
  auto state = ledger::initial_state(s.config());
  for (const auto& r : s.records()) {
    if (!r.active()) {
      if (r.budget) return "inactive record " + std::to_string(r.id) + " has a budget";
      continue;
    }
    const auto d = ledger::step(state, s.config(), r.result->p_value, r.support_fraction);
    const auto want = d.outcome == ledger::Outcome::rejected   ? session::DecisionState::rejected
                      : d.outcome == ledger::Outcome::accepted ? session::DecisionState::accepted
                                                               : session::DecisionState::untested;
    if (r.decision != want) return "decision differs for record " + std::to_string(r.id);
    if (d.outcome != ledger::Outcome::untested && (!r.budget || *r.budget != d.budget)) {
      return "budget differs for record " + std::to_string(r.id);
    }
  }
  if (!(state == s.ledger_state())) return "final ledger state differs";
  return {};
}

}  // namespace fuzz
