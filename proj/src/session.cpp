#include "aware/session.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "aware/errors.hpp"
#include "aware/json_io.hpp"

using nlohmann::json;

namespace aware::session {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string selection(const data::Filters& filters) {
  return filters.empty() ? std::string("all rows") : data::describe(filters);
}

std::vector<double> scaled(const std::vector<double>& v, double c) {
  std::vector<double> out(v);
  for (auto& x : out) x *= c;
  return out;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Adds `extra` total mass distributed as `shape` (normalized) to `v`.
std::vector<double> mixed(const std::vector<double>& v, const std::vector<double>& shape,
                          double extra) {
  const double total = sum(shape);
  std::vector<double> out(v);
  if (total <= 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += extra * shape[i] / total;
  return out;
}

}  // namespace

double flipped_p_value(const TestData& data, bool to_reject, double factor) {
  if (!(factor >= 1.0)) throw DomainError("flip factor must be >= 1");
  return std::visit(
      overloaded{
          [&](const GofData& d) {
            if (to_reject) return stats::chi2_gof_counts(scaled(d.observed, factor), d.reference).p_value;
            const auto obs = mixed(d.observed, d.reference, (factor - 1.0) * sum(d.observed));
            return stats::chi2_gof_counts(obs, d.reference).p_value;
          },
          [&](const HomogeneityData& d) {
            if (to_reject) {
              return stats::chi2_homogeneity_counts(scaled(d.a, factor), scaled(d.b, factor)).p_value;
            }
            std::vector<double> pooled(d.a.size());
            for (std::size_t i = 0; i < pooled.size(); ++i) pooled[i] = d.a[i] + d.b[i];
            const auto a = mixed(d.a, pooled, (factor - 1.0) * sum(d.a));
            const auto b = mixed(d.b, pooled, (factor - 1.0) * sum(d.b));
            return stats::chi2_homogeneity_counts(a, b).p_value;
          },
          [&](const WelchData& d) {
            stats::SampleSummary a = d.a;
            stats::SampleSummary b = d.b;
            if (to_reject) {
              a.n *= factor;
              b.n *= factor;
              return stats::welch_t_test(a, b, d.alternative).p_value;
            }
            // Extra points drawn around the pooled mean with the pooled spread.
            const double n = a.n + b.n;
            const double mu = (a.n * a.mean + b.n * b.mean) / n;
            const double var = ((a.n - 1.0) * a.variance + (b.n - 1.0) * b.variance) / (n - 2.0);
            auto dilute = [&](stats::SampleSummary s) {
              const double extra = (factor - 1.0) * s.n;
              const double total = s.n + extra;
              const double mean = (s.n * s.mean + extra * mu) / total;
              const double ss = (s.n - 1.0) * s.variance + extra * var +
                                s.n * (s.mean - mean) * (s.mean - mean) +
                                extra * (mu - mean) * (mu - mean);
              return stats::SampleSummary{mean, ss / (total - 1.0), total};
            };
            return stats::welch_t_test(dilute(a), dilute(b), d.alternative).p_value;
          },
      },
      data);
}

std::string_view to_string(DecisionState decision) {
  switch (decision) {
    case DecisionState::rejected: return "rejected";
    case DecisionState::accepted: return "accepted";
    case DecisionState::untested: return "untested";
    case DecisionState::descriptive: return "descriptive";
  }
  return "descriptive";
}

DecisionState decision_from_string(std::string_view name) {
  if (name == "rejected") return DecisionState::rejected;
  if (name == "accepted") return DecisionState::accepted;
  if (name == "untested") return DecisionState::untested;
  if (name == "descriptive") return DecisionState::descriptive;
  throw SchemaError("unknown decision: " + std::string(name));
}

std::string_view to_string(FlipDirection direction) {
  return direction == FlipDirection::to_reject ? "to_reject" : "to_accept";
}

FlipDirection flip_direction_from_string(std::string_view name) {
  if (name == "to_reject") return FlipDirection::to_reject;
  if (name == "to_accept") return FlipDirection::to_accept;
  throw SchemaError("unknown flip direction: " + std::string(name));
}

bool HypothesisRecord::active() const {
  return spec.has_value() && result.has_value() && !deleted && !superseded_by.has_value();
}

FlipResult flip_factor(const TestData& data, double p_value, double budget,
                       FlipDirection direction) {
  FlipResult out;
  out.budget = budget;
  const bool to_reject = direction == FlipDirection::to_reject;
  if (to_reject ? p_value <= budget : p_value > budget) return out;

  auto flips = [&](double c) {
    const double q = flipped_p_value(data, to_reject, c);
    return to_reject ? q <= budget : q > budget;
  };
  if (!flips(kFlipCap)) {
    out.factor = kFlipCap;
    out.reachable = false;
    return out;
  }
  double lo = 1.0;
  double hi = kFlipCap;
  while (hi / lo > 1.0 + kFlipRelativeTolerance) {
    const double mid = std::sqrt(lo * hi);
    if (flips(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.factor = hi;
  return out;
}

// --- Session ----------------------------------------------------------------

Session::Session(std::string id, std::shared_ptr<const data::Dataset> dataset,
                 ledger::LedgerConfig config)
    : id_(std::move(id)), dataset_(std::move(dataset)), config_(std::move(config)) {
  if (!dataset_) throw MissingInputError("session needs a dataset");
  config_.validate();
  state_ = ledger::initial_state(config_);
}

Session Session::rebuild(std::shared_ptr<const data::Dataset> dataset, const json& header,
                         const std::vector<json>& events) {
  if (!header.is_object() || !header.contains("id")) throw ReplayError("bad session header");
  ledger::LedgerConfig config;
  try {
    config = ledger::config_from_json(header);
  } catch (const Error& e) {
    throw ReplayError(std::string("bad session header: ") + e.what());
  }
  Session s(header.at("id").get<std::string>(), std::move(dataset), config);
  for (const auto& e : events) s.apply(e);
  return s;
}

json Session::header() const {
  json h = ledger::config_to_json(config_);
  h["type"] = "session";
  h["id"] = id_;
  h["dataset"] = dataset_->name();
  h["version"] = 1;
  return h;
}

const HypothesisRecord& Session::record(std::int64_t id) const { return records_[index_of(id)]; }

HypothesisRecord& Session::mutable_record(std::int64_t id) { return records_[index_of(id)]; }

std::size_t Session::index_of(std::int64_t id) const {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].id == id) return i;
  }
  throw NotFoundError("no hypothesis with id " + std::to_string(id));
}

void Session::apply(const json& event) {
  const auto type = event.value("type", std::string());
  if (type == "visualization") {
    apply_visualization(event.at("viz").get<VisualizationSpec>());
  } else if (type == "hypothesis") {
    apply_hypothesis(test_spec_from_json(event.at("test")));
  } else if (type == "override") {
    apply_override(event.at("id").get<std::int64_t>(), test_spec_from_json(event.at("test")));
  } else if (type == "delete") {
    apply_delete(event.at("id").get<std::int64_t>());
  } else if (type == "star") {
    apply_star(event.at("id").get<std::int64_t>(), event.at("on").get<bool>());
  } else {
    throw ReplayError("unknown event type: " + type);
  }
  events_.push_back(event);
}

DeriveOutcome Session::derive_hypothesis(const VisualizationSpec& viz) {
  if (!dataset_->has_column(viz.target)) throw SchemaError("unknown column: " + viz.target);
  for (const auto& f : viz.filters) f.validate(*dataset_);
  if (viz.bins < 1) throw SchemaError("bins must be positive");
  if (viz.linked_to) {
    const bool known = std::any_of(visualizations_.begin(), visualizations_.end(),
                                   [&](const auto& v) { return v.id == *viz.linked_to; });
    if (!known) throw NotFoundError("no visualization with id " + std::to_string(*viz.linked_to));
  }
  json event{{"type", "visualization"}, {"viz", viz}};
  auto out = apply_visualization(viz);
  events_.push_back(std::move(event));
  return out;
}

const HypothesisRecord& Session::add_hypothesis(const TestSpec& spec) {
  validate(spec);
  json event{{"type", "hypothesis"}, {"test", test_spec_to_json(spec)}};
  const auto id = apply_hypothesis(spec);
  events_.push_back(std::move(event));
  return record(id);
}

const HypothesisRecord& Session::override_hypothesis(std::int64_t id, const TestSpec& spec) {
  const auto& r = record(id);
  if (r.deleted) throw StateError("hypothesis was deleted");
  if (r.superseded_by) throw StateError("hypothesis was superseded");
  validate(spec);
  json event{{"type", "override"}, {"id", id}, {"test", test_spec_to_json(spec)}};
  apply_override(id, spec);
  events_.push_back(std::move(event));
  return record(id);
}

void Session::delete_hypothesis(std::int64_t id) {
  if (record(id).deleted) throw StateError("hypothesis already deleted");
  json event{{"type", "delete"}, {"id", id}};
  apply_delete(id);
  events_.push_back(std::move(event));
}

StarOutcome Session::star_hypothesis(std::int64_t id, bool on) {
  if (on && !record(id).decided()) throw StateError("only tested hypotheses can be starred");
  json event{{"type", "star"}, {"id", id}, {"on", on}};
  auto out = apply_star(id, on);
  events_.push_back(std::move(event));
  return out;
}

DeriveOutcome Session::apply_visualization(const VisualizationSpec& viz) {
  const std::int64_t viz_id = next_viz_id_++;
  visualizations_.push_back({viz_id, viz});

  DeriveOutcome out;
  out.viz_id = viz_id;

  HypothesisRecord rec;
  rec.id = next_record_id_++;
  rec.origin = Origin::visualization;
  out.record_id = rec.id;

  const VisualizationEntry* linked = nullptr;
  if (viz.linked_to) {
    for (const auto& v : visualizations_) {
      if (v.id == *viz.linked_to) linked = &v;
    }
  }

  std::size_t first_dirty = records_.size();
  if (linked && linked->spec.target == viz.target &&
      data::complementary(linked->spec.filters, viz.filters)) {
    const std::int64_t other = linked->id;
    rec.spec = HomogeneitySpec{viz.target, linked->spec.filters, viz.filters, viz.bins};
    rec.source_viz = {other, viz_id};
    for (std::size_t i = 0; i < records_.size(); ++i) {
      auto& r = records_[i];
      if (r.origin != Origin::visualization || r.deleted || r.superseded_by || !r.spec ||
          !std::holds_alternative<GofSpec>(*r.spec)) {
        continue;
      }
      const bool from_pair = std::find(r.source_viz.begin(), r.source_viz.end(), other) !=
                             r.source_viz.end();
      if (!from_pair) continue;
      r.superseded_by = rec.id;
      r.starred = false;
      out.superseded.push_back(r.id);
      first_dirty = std::min(first_dirty, i);
    }
  } else if (viz.filters.empty()) {
    rec.source_viz = {viz_id};
    rec.null_text = "Distribution of " + viz.target + " over the whole dataset";
    rec.alternative_text = "(descriptive, no test)";
    rec.decision = DecisionState::descriptive;
    out.descriptive = true;
  } else {
    rec.spec = GofSpec{viz.target, viz.filters, viz.bins, std::nullopt};
    rec.source_viz = {viz_id};
  }

  if (rec.spec) run_test(rec);
  records_.push_back(std::move(rec));
  snapshots_.push_back(state_);
  recompute_from(first_dirty);
  return out;
}

std::int64_t Session::apply_hypothesis(const TestSpec& spec) {
  HypothesisRecord rec;
  rec.id = next_record_id_++;
  rec.origin = Origin::explicit_test;
  rec.spec = spec;
  run_test(rec);
  records_.push_back(std::move(rec));
  snapshots_.push_back(state_);
  recompute_from(records_.size() - 1);
  return records_.back().id;
}

void Session::apply_override(std::int64_t id, const TestSpec& spec) {
  const std::size_t i = index_of(id);
  auto& r = records_[i];
  r.spec = spec;
  run_test(r);
  recompute_from(i);
}

void Session::apply_delete(std::int64_t id) {
  const std::size_t i = index_of(id);
  records_[i].deleted = true;
  records_[i].starred = false;
  recompute_from(i);
}

StarOutcome Session::apply_star(std::int64_t id, bool on) {
  auto& r = mutable_record(id);
  if (on && !r.decided()) throw StateError("only tested hypotheses can be starred");
  r.starred = on;

  StarOutcome out{id, on, {}};
  // Flag a starred set that is exactly the k smallest p-values among the
  // discoveries: that selection rule invalidates the ledger's guarantee.
  std::vector<const HypothesisRecord*> discoveries;
  for (const auto& x : records_) {
    if (x.decision == DecisionState::rejected && x.result) discoveries.push_back(&x);
  }
  std::stable_sort(discoveries.begin(), discoveries.end(), [](const auto* a, const auto* b) {
    return a->result->p_value < b->result->p_value;
  });
  std::size_t k = 0;
  for (const auto* d : discoveries) k += d->starred ? 1 : 0;
  const std::size_t starred_total =
      std::count_if(records_.begin(), records_.end(), [](const auto& x) { return x.starred; });
  if (k >= 1 && k < discoveries.size() && starred_total == k) {
    bool lowest = true;
    for (std::size_t i = 0; i < k; ++i) lowest = lowest && discoveries[i]->starred;
    // ties at the boundary make the choice ambiguous, not p-value driven
    if (lowest && discoveries[k - 1]->result->p_value < discoveries[k]->result->p_value) {
      out.warning =
          "the starred discoveries are exactly the ones with the smallest p-values; "
          "reporting only them does not keep the false discovery guarantee";
    }
  }
  return out;
}

void Session::validate(const TestSpec& spec) const {
  std::visit(overloaded{
                 [&](const GofSpec& s) {
                   dataset_->column(s.target);
                   for (const auto& f : s.filters) f.validate(*dataset_);
                   if (s.bins < 1) throw SchemaError("bins must be positive");
                   if (s.reference) {
                     const auto observed = data::histogram_of(*dataset_, s.target, {}, s.bins);
                     auto want = observed.labels();
                     auto have = s.reference->labels();
                     std::sort(want.begin(), want.end());
                     std::sort(have.begin(), have.end());
                     if (want != have) {
                       throw SchemaError("reference bins do not match the bins of " + s.target);
                     }
                   }
                 },
                 [&](const HomogeneitySpec& s) {
                   dataset_->column(s.target);
                   for (const auto& f : s.filters_a) f.validate(*dataset_);
                   for (const auto& f : s.filters_b) f.validate(*dataset_);
                   if (s.bins < 1) throw SchemaError("bins must be positive");
                 },
                 [&](const WelchSpec& s) {
                   if (dataset_->column(s.target).kind != data::ColumnKind::numeric) {
                     throw SchemaError("welch test needs a numeric column: " + s.target);
                   }
                   for (const auto& f : s.filters_a) f.validate(*dataset_);
                   for (const auto& f : s.filters_b) f.validate(*dataset_);
                 },
             },
             spec);
}

void Session::run_test(HypothesisRecord& r) const {
  r.result.reset();
  r.data.reset();
  r.warning.clear();
  r.support_fraction = 0.0;
  const double rows = static_cast<double>(dataset_->row_count());
  const auto& ds = *dataset_;
  try {
    std::visit(
        overloaded{
            [&](const GofSpec& s) {
              const auto sel = selection(s.filters);
              if (s.reference) {
                r.null_text = "The distribution of " + s.target + " for " + sel +
                              " matches the given reference distribution";
                r.alternative_text = "The distribution of " + s.target + " for " + sel +
                                     " differs from the given reference distribution";
              } else {
                r.null_text = "The distribution of " + s.target + " for " + sel +
                              " is the same as over the whole dataset";
                r.alternative_text = "The distribution of " + s.target + " for " + sel +
                                     " differs from the whole dataset";
              }
              const auto observed = data::histogram_of(ds, s.target, s.filters, s.bins);
              if (data::is_degenerate(observed)) {
                throw DegenerateInputError("selection is empty or has a single bin");
              }
              stats::Histogram reference;
              if (s.reference) {
                std::unordered_map<std::string, std::int64_t> by_label;
                for (const auto& b : s.reference->bins) by_label[b.label] = b.count;
                for (const auto& b : observed.bins) reference.bins.push_back({b.label, by_label.at(b.label)});
              } else {
                reference = data::histogram_of(ds, s.target, {}, s.bins);
              }
              r.result = stats::chi2_goodness_of_fit(observed, reference);
              r.data = GofData{observed.counts(), reference.counts()};
            },
            [&](const HomogeneitySpec& s) {
              const auto sa = selection(s.filters_a);
              const auto sb = selection(s.filters_b);
              r.null_text = "The distribution of " + s.target + " is the same for " + sa +
                            " and for " + sb;
              r.alternative_text = "The distribution of " + s.target + " differs between " +
                                   sa + " and " + sb;
              const auto a = data::histogram_of(ds, s.target, s.filters_a, s.bins);
              const auto b = data::histogram_of(ds, s.target, s.filters_b, s.bins);
              if (a.bins.size() < 2 || a.total() == 0 || b.total() == 0) {
                throw DegenerateInputError("a selection is empty or there is a single bin");
              }
              r.result = stats::chi2_homogeneity(a, b);
              r.data = HomogeneityData{a.counts(), b.counts()};
            },
            [&](const WelchSpec& s) {
              const auto sa = selection(s.filters_a);
              const auto sb = selection(s.filters_b);
              r.null_text = "The mean of " + s.target + " is the same for " + sa + " and for " + sb;
              r.alternative_text =
                  s.alternative == stats::Alternative::greater
                      ? "The mean of " + s.target + " is greater for " + sa + " than for " + sb
                      : "The mean of " + s.target + " differs between " + sa + " and " + sb;
              const auto a = data::numeric_values(ds, s.target, s.filters_a);
              const auto b = data::numeric_values(ds, s.target, s.filters_b);
              const auto summary_a = stats::summarize(a);
              const auto summary_b = stats::summarize(b);
              r.result = stats::welch_t_test(summary_a, summary_b, s.alternative);
              r.data = WelchData{summary_a, summary_b, s.alternative};
            },
        },
        *r.spec);
  } catch (const DegenerateInputError& e) {
    r.result.reset();
    r.data.reset();
    r.warning = std::string("no valid test: ") + e.what();
    return;
  }
  if (rows > 0) {
    r.support_fraction = std::min(1.0, static_cast<double>(r.result->support) / rows);
  }
}

void Session::recompute_from(std::size_t index) {
  if (index >= records_.size()) return;
  ledger::LedgerState state = snapshots_[index];
  for (std::size_t k = index; k < records_.size(); ++k) {
    snapshots_[k] = state;
    auto& r = records_[k];
    r.budget.reset();
    if (r.active()) {
      const auto sd = ledger::step(state, config_, r.result->p_value, r.support_fraction);
      switch (sd.outcome) {
        case ledger::Outcome::rejected: r.decision = DecisionState::rejected; break;
        case ledger::Outcome::accepted: r.decision = DecisionState::accepted; break;
        case ledger::Outcome::untested: r.decision = DecisionState::untested; break;
      }
      if (sd.outcome != ledger::Outcome::untested) r.budget = sd.budget;
    } else if (r.spec && !r.result && !r.deleted && !r.superseded_by) {
      r.decision = DecisionState::untested;
    } else {
      r.decision = DecisionState::descriptive;
    }
    if (!r.decided()) r.starred = false;
  }
  state_ = state;
}

std::optional<double> Session::current_budget(const HypothesisRecord& r) const {
  if (state_.exhausted) return std::nullopt;
  std::optional<double> fraction;
  if (r.support_fraction > 0.0) fraction = r.support_fraction;
  try {
    return ledger::next_budget(state_, config_, fraction);
  } catch (const MissingInputError&) {
    return std::nullopt;
  } catch (const ExhaustionError&) {
    return std::nullopt;
  }
}

FlipResult Session::data_to_flip(std::int64_t id, FlipDirection direction) const {
  const auto& r = record(id);
  if (!r.result || !r.data || r.decision == DecisionState::descriptive) {
    throw StateError("hypothesis has no test result to flip");
  }
  const auto budget = current_budget(r);
  if (!budget) throw StateError("ledger is exhausted; no budget to flip against");

  const bool to_reject = direction == FlipDirection::to_reject;
  if (to_reject && r.decision == DecisionState::rejected) return {1.0, true, *budget};
  if (!to_reject && r.decision == DecisionState::accepted) return {1.0, true, *budget};
  return flip_factor(*r.data, r.result->p_value, *budget, direction);
}

json Session::state_json() const {
  json j = ledger::config_to_json(config_);
  j["id"] = id_;
  j["dataset"] = dataset_->name();
  j["policy_spec"] = ledger::describe(config_.policy);
  j["wealth"] = state_.wealth;
  j["exhausted"] = state_.exhausted;
  j["tests"] = state_.j;
  json viz = json::array();
  for (const auto& v : visualizations_) {
    json e = v.spec;
    e["id"] = v.id;
    viz.push_back(std::move(e));
  }
  j["visualizations"] = std::move(viz);
  json records = json::array();
  for (const auto& r : records_) {
    json e = record_to_json(r);
    json flip = {{"to_reject", nullptr}, {"to_accept", nullptr}};
    if (r.result && r.data && r.decision != DecisionState::descriptive) {
      for (auto dir : {FlipDirection::to_reject, FlipDirection::to_accept}) {
        try {
          const auto f = data_to_flip(r.id, dir);
          flip[std::string(to_string(dir))] = f.reachable ? json(f.factor) : json(nullptr);
        } catch (const StateError&) {
        }
      }
    }
    e["flip_factor"] = std::move(flip);
    records.push_back(std::move(e));
  }
  j["records"] = std::move(records);
  return j;
}

bool Session::same_state(const Session& other) const {
  return records_ == other.records_ && visualizations_ == other.visualizations_ &&
         state_ == other.state_ && snapshots_ == other.snapshots_;
}

}  // namespace aware::session
