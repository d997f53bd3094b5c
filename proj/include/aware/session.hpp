#pragma once

// Interactive hypothesis tracking.
//
// A session owns an ordered list of hypothesis records and an alpha-investing
// ledger. Every mutation is first written as an event, then applied; replaying
// the event log from scratch reproduces the session exactly. Records are
// tested in list order. Editing record k (override, delete, supersession)
// re-runs the ledger from the snapshot stored just before k, so records
// before k can never change.
//
// Visualization heuristics:
//   - no filters: descriptive only, no test
//   - filters: goodness of fit of the filtered distribution of the target
//     against its distribution over the whole dataset
//   - linked to a visualization with the same target and complementary
//     filters: homogeneity test between the two selections; it supersedes
//     the goodness-of-fit records of both visualizations

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "aware/dataset.hpp"
#include "aware/ledger.hpp"
#include "aware/stats.hpp"

namespace aware::session {

struct VisualizationSpec {
  std::string target;
  data::Filters filters;
  std::optional<std::int64_t> linked_to;
  int bins = data::kDefaultBins;

  bool operator==(const VisualizationSpec&) const = default;
};

struct GofSpec {
  std::string target;
  data::Filters filters;
  int bins = data::kDefaultBins;
  // Expected distribution; the whole-dataset histogram of `target` when empty.
  std::optional<stats::Histogram> reference;

  bool operator==(const GofSpec&) const = default;
};

struct HomogeneitySpec {
  std::string target;
  data::Filters filters_a;
  data::Filters filters_b;
  int bins = data::kDefaultBins;

  bool operator==(const HomogeneitySpec&) const = default;
};

struct WelchSpec {
  std::string target;
  data::Filters filters_a;
  data::Filters filters_b;
  stats::Alternative alternative = stats::Alternative::two_sided;

  bool operator==(const WelchSpec&) const = default;
};

using TestSpec = std::variant<GofSpec, HomogeneitySpec, WelchSpec>;

/// Raw test inputs kept with a record so the flip-factor search can rescale
/// them without touching the dataset again.
struct GofData {
  std::vector<double> observed;
  std::vector<double> reference;
  bool operator==(const GofData&) const = default;
};
struct HomogeneityData {
  std::vector<double> a;
  std::vector<double> b;
  bool operator==(const HomogeneityData&) const = default;
};
struct WelchData {
  stats::SampleSummary a;
  stats::SampleSummary b;
  stats::Alternative alternative = stats::Alternative::two_sided;
  bool operator==(const WelchData&) const = default;
};
using TestData = std::variant<GofData, HomogeneityData, WelchData>;

/// p-value of `data` after scaling (to_reject) or diluting with null-shaped
/// data (to_accept) by total-size multiplier `factor` >= 1.
double flipped_p_value(const TestData& data, bool to_reject, double factor);

enum class DecisionState { rejected, accepted, untested, descriptive };

std::string_view to_string(DecisionState decision);
DecisionState decision_from_string(std::string_view name);

enum class Origin { visualization, explicit_test };

struct HypothesisRecord {
  std::int64_t id = 0;
  std::string null_text;
  std::string alternative_text;
  Origin origin = Origin::visualization;
  std::optional<TestSpec> spec;  // empty for descriptive visualizations
  std::vector<std::int64_t> source_viz;
  std::optional<stats::TestResult> result;  // empty when no valid test exists
  std::optional<TestData> data;
  double support_fraction = 0.0;
  std::optional<double> budget;
  DecisionState decision = DecisionState::descriptive;
  bool starred = false;
  std::optional<std::int64_t> superseded_by;
  bool deleted = false;
  std::string warning;

  /// Takes part in the ledger: tested, not deleted, not superseded.
  bool active() const;
  bool decided() const {
    return decision == DecisionState::rejected || decision == DecisionState::accepted;
  }

  bool operator==(const HypothesisRecord&) const = default;
};

struct VisualizationEntry {
  std::int64_t id = 0;
  VisualizationSpec spec;
  bool operator==(const VisualizationEntry&) const = default;
};

struct DeriveOutcome {
  std::int64_t viz_id = 0;
  std::int64_t record_id = 0;
  bool descriptive = false;
  std::vector<std::int64_t> superseded;
};

struct StarOutcome {
  std::int64_t record_id = 0;
  bool starred = false;
  std::string warning;  // non-empty when the starred set looks p-value driven
};

enum class FlipDirection { to_reject, to_accept };

std::string_view to_string(FlipDirection direction);
FlipDirection flip_direction_from_string(std::string_view name);

inline constexpr double kFlipCap = 1e6;
inline constexpr double kFlipRelativeTolerance = 1e-3;

struct FlipResult {
  double factor = 1.0;  // kFlipCap when unreachable
  bool reachable = true;
  double budget = 0.0;  // budget the policy would assign right now
};

/// Smallest multiplier c in [1, kFlipCap] after which the p-value of `data`
/// crosses `budget` in `direction`; 1 when it already has.
FlipResult flip_factor(const TestData& data, double p_value, double budget,
                       FlipDirection direction);

class Session {
 public:
  Session(std::string id, std::shared_ptr<const data::Dataset> dataset,
          ledger::LedgerConfig config);

  /// Rebuilds a session from its header line and event list.
  static Session rebuild(std::shared_ptr<const data::Dataset> dataset,
                         const nlohmann::json& header,
                         const std::vector<nlohmann::json>& events);

  const std::string& id() const { return id_; }
  const data::Dataset& dataset() const { return *dataset_; }
  const ledger::LedgerConfig& config() const { return config_; }
  const ledger::LedgerState& ledger_state() const { return state_; }
  const std::vector<HypothesisRecord>& records() const { return records_; }
  const std::vector<VisualizationEntry>& visualizations() const { return visualizations_; }
  const std::vector<nlohmann::json>& events() const { return events_; }

  /// Throws NotFoundError.
  const HypothesisRecord& record(std::int64_t id) const;

  /// Header line of the persisted event log.
  nlohmann::json header() const;

  DeriveOutcome derive_hypothesis(const VisualizationSpec& viz);
  const HypothesisRecord& add_hypothesis(const TestSpec& spec);
  const HypothesisRecord& override_hypothesis(std::int64_t id, const TestSpec& spec);
  void delete_hypothesis(std::int64_t id);
  StarOutcome star_hypothesis(std::int64_t id, bool on);

  /// Multiplier of the record's data needed to flip its decision against the
  /// budget the policy would assign at the current state.
  FlipResult data_to_flip(std::int64_t id, FlipDirection direction) const;

  /// Budget the ledger would assign to `record` now; empty when exhausted.
  std::optional<double> current_budget(const HypothesisRecord& record) const;

  /// Full summary as served by the HTTP API.
  nlohmann::json state_json() const;

  /// Same records, visualizations and ledger state.
  bool same_state(const Session& other) const;

 private:
  void apply(const nlohmann::json& event);
  DeriveOutcome apply_visualization(const VisualizationSpec& viz);
  std::int64_t apply_hypothesis(const TestSpec& spec);
  void apply_override(std::int64_t id, const TestSpec& spec);
  void apply_delete(std::int64_t id);
  StarOutcome apply_star(std::int64_t id, bool on);

  HypothesisRecord& mutable_record(std::int64_t id);
  std::size_t index_of(std::int64_t id) const;
  void run_test(HypothesisRecord& record) const;
  void validate(const TestSpec& spec) const;
  void recompute_from(std::size_t index);

  std::string id_;
  std::shared_ptr<const data::Dataset> dataset_;
  ledger::LedgerConfig config_;
  ledger::LedgerState state_;
  std::vector<HypothesisRecord> records_;
  // ledger state in effect just before each record
  std::vector<ledger::LedgerState> snapshots_;
  std::vector<VisualizationEntry> visualizations_;
  std::vector<nlohmann::json> events_;
  std::int64_t next_record_id_ = 1;
  std::int64_t next_viz_id_ = 1;
};

}  // namespace aware::session
